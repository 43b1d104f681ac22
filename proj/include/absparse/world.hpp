#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace absparse {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Knowledge-base data model.
//
// A scene is three boxes, each a 100x100 integer grid holding axis-aligned
// square items. Coordinates are top-left anchored: y=0 is the top wall and
// y grows downward, so "above" means smaller y.
// ---------------------------------------------------------------------------

inline constexpr int kGridExtent = 100;
inline constexpr int kNumBoxes = 3;

enum class Color : std::uint8_t { Yellow, Blue, Black };
enum class Shape : std::uint8_t { Square, Circle, Triangle };
enum class Size : std::uint8_t { Small, Medium, Big };

inline constexpr int extent(Size s) {
  switch (s) {
    case Size::Small: return 10;
    case Size::Medium: return 20;
    case Size::Big: return 30;
  }
  return 0;
}

std::string to_string(Color c);
std::string to_string(Shape s);
std::string to_string(Size s);
Color color_from_string(const std::string& s);
Shape shape_from_string(const std::string& s);
Size size_from_string(const std::string& s);

struct Item {
  Color color = Color::Yellow;
  Shape shape = Shape::Square;
  Size size = Size::Small;
  int x = 0;
  int y = 0;
  int box_index = 0;

  bool operator==(const Item&) const = default;
};

struct KnowledgeBase {
  std::array<std::vector<Item>, kNumBoxes> boxes;

  // Items flattened in box order; indices into this vector are the canonical
  // item references used by the executor.
  std::vector<Item> all_items() const;
  std::size_t item_count() const;

  // Throws Error on any violated geometric or box-index invariant.
  void validate() const;

  bool operator==(const KnowledgeBase&) const = default;
};

// ---------------------------------------------------------------------------
// Corpus records and grouping.
// ---------------------------------------------------------------------------

struct CorpusRecord {
  std::string sentence;
  bool label = false;
  KnowledgeBase kb;
  std::optional<std::string> program_text;  // present only in generated corpora
};

enum class CorpusFormat { Canonical, Cnlvr };

// Field/value maps for the CNLVR structured-representation release. The JSON
// schema of the release is not fixed by this codebase; everything is driven
// by a config file so the adapter can be validated against the data itself.
struct CnlvrFieldMap {
  std::string sentence_field = "sentence";
  std::string label_field = "label";
  std::string boxes_field = "structured_rep";
  std::string x_field = "x_loc";
  std::string y_field = "y_loc";
  std::string color_field = "color";
  std::string shape_field = "type";
  std::string size_field = "size";
  std::vector<std::pair<std::string, bool>> label_values;
  std::vector<std::pair<std::string, Color>> color_values;
  std::vector<std::pair<std::string, Shape>> shape_values;
  std::vector<std::pair<std::string, Size>> size_values;

  static CnlvrFieldMap load(const std::string& path);
};

// One record per line. The canonical writer below is the format authority;
// loading a canonical file and re-serializing it is byte-identical.
std::string record_to_json(const CorpusRecord& rec);
CorpusRecord record_from_json(const std::string& line, std::size_t record_index);

std::vector<CorpusRecord> load_corpus(const std::string& path, CorpusFormat format,
                                      const CnlvrFieldMap* field_map = nullptr);
void save_corpus(const std::vector<CorpusRecord>& records, const std::string& path);

struct ExampleGroup {
  std::string raw_utterance;
  std::vector<std::string> utterance;  // preprocessed tokens, filled by the pipeline
  std::vector<std::pair<KnowledgeBase, bool>> pairs;

  // Groups of any other size are kept but excluded from tied-reward training.
  bool tied_eligible() const { return pairs.size() == 4; }
};

// Partitions records by identical raw utterance, preserving first-seen order.
std::vector<ExampleGroup> group_by_utterance(const std::vector<CorpusRecord>& records);

// ---------------------------------------------------------------------------
// Synthetic world sampler (dataset-free tests and toy domains).
// ---------------------------------------------------------------------------

struct WorldSpec {
  std::array<int, kNumBoxes> items_per_box{1, 1, 1};
  // Attributes are sampled uniformly unless pinned here.
  std::optional<Color> fixed_color;
  std::optional<Shape> fixed_shape;
  std::optional<Size> fixed_size;
};

// Deterministic for a fixed seed. Items are placed without overlap; an
// infeasible spec fails with Error after bounded rejection attempts.
KnowledgeBase sample_world(std::uint64_t seed, const WorldSpec& spec);

}  // namespace absparse
