#include "absparse/world.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace absparse {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Color c) {
  switch (c) {
    case Color::Yellow: return "Yellow";
    case Color::Blue: return "Blue";
    case Color::Black: return "Black";
  }
  return "?";
}

std::string to_string(Shape s) {
  switch (s) {
    case Shape::Square: return "Square";
    case Shape::Circle: return "Circle";
    case Shape::Triangle: return "Triangle";
  }
  return "?";
}

std::string to_string(Size s) {
  switch (s) {
    case Size::Small: return "Small";
    case Size::Medium: return "Medium";
    case Size::Big: return "Big";
  }
  return "?";
}

Color color_from_string(const std::string& s) {
  if (s == "Yellow") return Color::Yellow;
  if (s == "Blue") return Color::Blue;
  if (s == "Black") return Color::Black;
  throw Error("unknown color: '" + s + "'");
}

Shape shape_from_string(const std::string& s) {
  if (s == "Square") return Shape::Square;
  if (s == "Circle") return Shape::Circle;
  if (s == "Triangle") return Shape::Triangle;
  throw Error("unknown shape: '" + s + "'");
}

Size size_from_string(const std::string& s) {
  if (s == "Small") return Size::Small;
  if (s == "Medium") return Size::Medium;
  if (s == "Big") return Size::Big;
  throw Error("unknown size: '" + s + "'");
}

std::vector<Item> KnowledgeBase::all_items() const {
  std::vector<Item> out;
  for (const auto& box : boxes) out.insert(out.end(), box.begin(), box.end());
  return out;
}

std::size_t KnowledgeBase::item_count() const {
  std::size_t n = 0;
  for (const auto& box : boxes) n += box.size();
  return n;
}

void KnowledgeBase::validate() const {
  for (int b = 0; b < kNumBoxes; ++b) {
    for (const Item& it : boxes[b]) {
      if (it.box_index != b)
        throw Error("item box_index " + std::to_string(it.box_index) +
                    " does not match box " + std::to_string(b));
      const int e = extent(it.size);
      if (it.x < 0 || it.y < 0 || it.x + e > kGridExtent || it.y + e > kGridExtent)
        throw Error("item out of bounds: x=" + std::to_string(it.x) +
                    " y=" + std::to_string(it.y) + " extent=" + std::to_string(e));
    }
  }
}

// -- canonical serialization -------------------------------------------------

static ordered_json item_to_json(const Item& it) {
  ordered_json j;
  j["color"] = to_string(it.color);
  j["shape"] = to_string(it.shape);
  j["size"] = to_string(it.size);
  j["x"] = it.x;
  j["y"] = it.y;
  return j;
}

std::string record_to_json(const CorpusRecord& rec) {
  ordered_json j;
  j["sentence"] = rec.sentence;
  j["label"] = rec.label;
  if (rec.program_text) j["program"] = *rec.program_text;
  ordered_json boxes = ordered_json::array();
  for (const auto& box : rec.kb.boxes) {
    ordered_json jb = ordered_json::array();
    for (const Item& it : box) jb.push_back(item_to_json(it));
    boxes.push_back(jb);
  }
  j["boxes"] = boxes;
  return j.dump();
}

CorpusRecord record_from_json(const std::string& line, std::size_t record_index) {
  const std::string where = "record " + std::to_string(record_index);
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw Error(where + ": malformed JSON: " + e.what());
  }
  CorpusRecord rec;
  try {
    rec.sentence = j.at("sentence").get<std::string>();
    rec.label = j.at("label").get<bool>();
    if (j.contains("program")) rec.program_text = j.at("program").get<std::string>();
    const auto& boxes = j.at("boxes");
    if (!boxes.is_array() || boxes.size() != kNumBoxes)
      throw Error("expected exactly 3 boxes");
    for (int b = 0; b < kNumBoxes; ++b) {
      for (const auto& ji : boxes[b]) {
        Item it;
        it.color = color_from_string(ji.at("color").get<std::string>());
        it.shape = shape_from_string(ji.at("shape").get<std::string>());
        it.size = size_from_string(ji.at("size").get<std::string>());
        it.x = ji.at("x").get<int>();
        it.y = ji.at("y").get<int>();
        it.box_index = b;
        rec.kb.boxes[b].push_back(it);
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(where + ": " + e.what());
  }
  try {
    rec.kb.validate();
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
  return rec;
}

// -- CNLVR adapter -----------------------------------------------------------

static std::string scalar_to_key(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    // non-integral numeric codes are keyed by their integer part when exact
    double d = v.get<double>();
    long long i = static_cast<long long>(d);
    if (static_cast<double>(i) == d) return std::to_string(i);
    return v.dump();
  }
  return v.dump();
}

template <typename T>
static T lookup_value(const std::vector<std::pair<std::string, T>>& table,
                      const std::string& key, const char* what) {
  for (const auto& [k, v] : table)
    if (k == key) return v;
  throw Error(std::string("unmapped ") + what + " value: '" + key + "'");
}

CnlvrFieldMap CnlvrFieldMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open field map: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error("field map " + path + ": " + e.what());
  }
  CnlvrFieldMap m;
  auto get_str = [&](const char* k, std::string& dst) {
    if (j.contains(k)) dst = j.at(k).get<std::string>();
  };
  get_str("sentence_field", m.sentence_field);
  get_str("label_field", m.label_field);
  get_str("boxes_field", m.boxes_field);
  get_str("x_field", m.x_field);
  get_str("y_field", m.y_field);
  get_str("color_field", m.color_field);
  get_str("shape_field", m.shape_field);
  get_str("size_field", m.size_field);
  if (j.contains("label_values"))
    for (auto& [k, v] : j.at("label_values").items())
      m.label_values.emplace_back(k, v.get<bool>());
  if (j.contains("color_values"))
    for (auto& [k, v] : j.at("color_values").items())
      m.color_values.emplace_back(k, color_from_string(v.get<std::string>()));
  if (j.contains("shape_values"))
    for (auto& [k, v] : j.at("shape_values").items())
      m.shape_values.emplace_back(k, shape_from_string(v.get<std::string>()));
  if (j.contains("size_values"))
    for (auto& [k, v] : j.at("size_values").items())
      m.size_values.emplace_back(k, size_from_string(v.get<std::string>()));
  return m;
}

static CorpusRecord record_from_cnlvr(const std::string& line, std::size_t record_index,
                                      const CnlvrFieldMap& m) {
  const std::string where = "record " + std::to_string(record_index);
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const std::exception& e) {
    throw Error(where + ": malformed JSON: " + e.what());
  }
  CorpusRecord rec;
  try {
    rec.sentence = j.at(m.sentence_field).get<std::string>();
    const auto& lv = j.at(m.label_field);
    if (lv.is_boolean()) {
      rec.label = lv.get<bool>();
    } else {
      rec.label = lookup_value(m.label_values, scalar_to_key(lv), "label");
    }
    const auto& boxes = j.at(m.boxes_field);
    if (!boxes.is_array() || boxes.size() != kNumBoxes)
      throw Error("expected exactly 3 boxes, got " + std::to_string(boxes.size()));
    for (int b = 0; b < kNumBoxes; ++b) {
      for (const auto& ji : boxes[b]) {
        Item it;
        it.color = lookup_value(m.color_values, scalar_to_key(ji.at(m.color_field)), "color");
        it.shape = lookup_value(m.shape_values, scalar_to_key(ji.at(m.shape_field)), "shape");
        it.size = lookup_value(m.size_values, scalar_to_key(ji.at(m.size_field)), "size");
        it.x = static_cast<int>(std::lround(ji.at(m.x_field).get<double>()));
        it.y = static_cast<int>(std::lround(ji.at(m.y_field).get<double>()));
        it.box_index = b;
        rec.kb.boxes[b].push_back(it);
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(where + ": " + e.what());
  }
  try {
    rec.kb.validate();
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
  return rec;
}

std::vector<CorpusRecord> load_corpus(const std::string& path, CorpusFormat format,
                                      const CnlvrFieldMap* field_map) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus: " + path);
  CnlvrFieldMap default_map;
  if (format == CorpusFormat::Cnlvr && field_map == nullptr)
    throw Error("CNLVR format requires a field map");
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) {
      ++index;
      continue;
    }
    if (format == CorpusFormat::Canonical)
      out.push_back(record_from_json(line, index));
    else
      out.push_back(record_from_cnlvr(line, index, *field_map));
    ++index;
  }
  return out;
}

void save_corpus(const std::vector<CorpusRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus: " + path);
  for (const auto& rec : records) out << record_to_json(rec) << "\n";
}

std::vector<ExampleGroup> group_by_utterance(const std::vector<CorpusRecord>& records) {
  std::vector<ExampleGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& rec : records) {
    auto it = index.find(rec.sentence);
    if (it == index.end()) {
      index.emplace(rec.sentence, groups.size());
      groups.push_back(ExampleGroup{rec.sentence, {}, {}});
      it = index.find(rec.sentence);
    }
    groups[it->second].pairs.emplace_back(rec.kb, rec.label);
  }
  return groups;
}

// -- synthetic sampler -------------------------------------------------------

static bool rects_overlap(const Item& a, const Item& b) {
  const int ea = extent(a.size), eb = extent(b.size);
  return a.x < b.x + eb && b.x < a.x + ea && a.y < b.y + eb && b.y < a.y + ea;
}

KnowledgeBase sample_world(std::uint64_t seed, const WorldSpec& spec) {
  for (int n : spec.items_per_box)
    if (n < 0) throw Error("negative item count in world spec");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> color_d(0, 2), shape_d(0, 2), size_d(0, 2);

  KnowledgeBase kb;
  constexpr int kMaxAttemptsPerItem = 400;
  for (int b = 0; b < kNumBoxes; ++b) {
    for (int i = 0; i < spec.items_per_box[b]; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxAttemptsPerItem && !placed; ++attempt) {
        Item it;
        it.color = spec.fixed_color.value_or(static_cast<Color>(color_d(rng)));
        it.shape = spec.fixed_shape.value_or(static_cast<Shape>(shape_d(rng)));
        it.size = spec.fixed_size.value_or(static_cast<Size>(size_d(rng)));
        const int e = extent(it.size);
        std::uniform_int_distribution<int> pos_d(0, kGridExtent - e);
        it.x = pos_d(rng);
        it.y = pos_d(rng);
        it.box_index = b;
        bool collides = false;
        for (const Item& other : kb.boxes[b])
          if (rects_overlap(it, other)) {
            collides = true;
            break;
          }
        if (!collides) {
          kb.boxes[b].push_back(it);
          placed = true;
        }
      }
      if (!placed)
        throw Error("infeasible world spec: failed to place item " + std::to_string(i) +
                    " in box " + std::to_string(b) + " after " +
                    std::to_string(kMaxAttemptsPerItem) + " attempts");
    }
  }
  kb.validate();
  return kb;
}

}  // namespace absparse
