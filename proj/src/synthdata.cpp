#include "camel/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "camel/tensor.hpp"

namespace camel {

namespace {

const std::array<std::string, kShirtColors> kShirtNames = {"red",    "blue",   "green", "yellow",
                                                          "purple", "orange", "pink",  "cyan"};
const std::array<std::string, kShirtColors> kShirtAliases = {"crimson", "azure",     "emerald", "golden",
                                                            "violet",  "tangerine", "rose",    "turquoise"};
const std::array<std::string, kPantsColors> kPantsNames = {"black", "gray",  "brown", "navy",
                                                          "khaki", "white", "olive", "beige"};
const std::array<std::string, kPantsColors> kPantsAliases = {"ebony", "grey",  "chocolate", "indigo",
                                                            "tan",   "ivory", "moss",      "cream"};
const std::array<std::string, kAccessories> kAccessoryNames = {"none", "hat", "bag", "glasses"};
const std::array<std::string, kBuilds> kBuildNames = {"slim", "broad"};

const Rgb kSkin{205, 165, 130};
const Rgb kHat{40, 40, 115};
const Rgb kBag{115, 75, 40};
const Rgb kGlasses{25, 25, 25};

std::vector<std::string> standard_tokens() {
  std::vector<std::string> t = {"[UNK]", "[PAD]", "a",        "person",   "pedestrian", "and",  "shirt",
                                "top",   "pants", "trousers", "standing", "walking",    "wearing", "carrying",
                                "holding", "stands", "walks", "wears", "carries", "has"};
  for (std::size_t i = 0; i < kShirtColors; ++i) t.push_back(kShirtNames[i]);
  for (std::size_t i = 0; i < kShirtColors; ++i) t.push_back(kShirtAliases[i]);
  for (std::size_t i = 0; i < kPantsColors; ++i) t.push_back(kPantsNames[i]);
  for (std::size_t i = 0; i < kPantsColors; ++i) t.push_back(kPantsAliases[i]);
  for (const char* w : {"hat", "cap", "bag", "backpack", "glasses", "spectacles", "slim", "thin", "broad", "stocky"})
    t.emplace_back(w);
  return t;
}

std::vector<std::vector<std::string>> standard_groups() {
  std::vector<std::vector<std::string>> g = {{"person", "pedestrian"}, {"shirt", "top"},   {"pants", "trousers"},
                                             {"hat", "cap"},           {"bag", "backpack"}, {"glasses", "spectacles"},
                                             {"slim", "thin"},         {"broad", "stocky"}};
  for (std::size_t i = 0; i < kShirtColors; ++i) g.push_back({kShirtNames[i], kShirtAliases[i]});
  for (std::size_t i = 0; i < kPantsColors; ++i) g.push_back({kPantsNames[i], kPantsAliases[i]});
  return g;
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

void fill_rect(Image& img, long y0, long y1, long x0, long x1, const Rgb& c) {
  const long h = static_cast<long>(img.height()), w = static_cast<long>(img.width());
  for (long y = std::max(0L, y0); y < std::min(h, y1); ++y)
    for (long x = std::max(0L, x0); x < std::min(w, x1); ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c.channel(ch);
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens, const std::vector<std::vector<std::string>>& synonym_groups)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[kUnkId] != "[UNK]" || tokens_[kPadId] != "[PAD]") {
    throw std::invalid_argument("vocabulary must start with [UNK], [PAD]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  group_of_.assign(tokens_.size(), -1);
  for (const auto& names : synonym_groups) {
    std::vector<int> ids;
    for (const auto& n : names) {
      auto it = index_.find(n);
      if (it == index_.end()) continue;
      if (group_of_[it->second] != -1) throw std::invalid_argument("token '" + n + "' is in two synonym groups");
      ids.push_back(it->second);
    }
    if (ids.size() < 2) continue;
    for (int id : ids) group_of_[id] = static_cast<int>(groups_.size());
    groups_.push_back(std::move(ids));
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary v(standard_tokens(), standard_groups());
  return v;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[id];
}

std::span<const int> Vocabulary::synonyms(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= group_of_.size() || group_of_[id] < 0) return {};
  return groups_[group_of_[id]];
}

Caption Vocabulary::encode(const std::string& text) const {
  Caption c;
  std::istringstream is(text);
  std::string w;
  while (is >> w && c.tokens.size() < kMaxCaptionLength) c.tokens.push_back(id(w));
  return c;
}

std::string Vocabulary::decode(const Caption& caption) const {
  std::string out;
  for (std::size_t i = 0; i < caption.tokens.size(); ++i) {
    if (i) out += ' ';
    out += token(caption.tokens[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attributes and styles

const std::array<Rgb, kShirtColors>& shirt_palette() {
  static const std::array<Rgb, kShirtColors> p = {Rgb{200, 40, 40},  Rgb{40, 60, 200},  Rgb{40, 160, 60},
                                                  Rgb{210, 200, 40}, Rgb{130, 50, 170}, Rgb{215, 120, 30},
                                                  Rgb{215, 110, 170}, Rgb{40, 190, 200}};
  return p;
}

const std::array<Rgb, kPantsColors>& pants_palette() {
  static const std::array<Rgb, kPantsColors> p = {Rgb{40, 40, 40},    Rgb{128, 128, 128}, Rgb{110, 70, 40},
                                                  Rgb{30, 40, 100},   Rgb{180, 160, 110}, Rgb{215, 215, 215},
                                                  Rgb{100, 110, 50},  Rgb{220, 195, 160}};
  return p;
}

const std::string& shirt_color_name(std::size_t i) { return kShirtNames.at(i); }
const std::string& pants_color_name(std::size_t i) { return kPantsNames.at(i); }
const std::string& accessory_name(std::size_t i) { return kAccessoryNames.at(i); }
const std::string& build_name(std::size_t i) { return kBuildNames.at(i); }

std::size_t PersonSpec::attribute_code() const {
  return ((shirt * kPantsColors + pants) * kAccessories + accessory) * kBuilds + build;
}

DomainStyle DomainStyle::synthetic() { return {"synthetic", 0.08, 0.0, CaptionRegister::gerund, 0.0}; }

DomainStyle DomainStyle::realistic() { return {"realistic", -0.08, 0.04, CaptionRegister::verb, 0.0}; }

DomainStyle DomainStyle::by_name(const std::string& name) {
  if (name == "synthetic") return synthetic();
  if (name == "realistic") return realistic();
  throw std::invalid_argument("unknown domain style '" + name + "' (expected synthetic or realistic)");
}

const std::vector<std::string>& gerund_tokens() {
  static const std::vector<std::string> g = {"standing", "walking", "wearing", "carrying", "holding"};
  return g;
}

Image render_person(const PersonSpec& spec, const DomainStyle& style, Rng& rng) {
  const double bg = 0.45 + rng.uniform(-0.05, 0.05);
  Image img(kImageSize, kImageSize, 3, bg);
  const long cx = 16 + rng.uniform_int(-2, 2);
  const long dy = rng.uniform_int(-1, 1);
  const long half = spec.build == 0 ? 4 : 7;
  const long leg_half = spec.build == 0 ? 3 : 5;

  fill_rect(img, 3 + dy, 9 + dy, cx - 3, cx + 3, kSkin);
  fill_rect(img, 9 + dy, 20 + dy, cx - half, cx + half, shirt_palette()[spec.shirt]);
  fill_rect(img, 20 + dy, 30 + dy, cx - leg_half, cx + leg_half, pants_palette()[spec.pants]);
  for (long y = 24 + dy; y < 30 + dy; ++y)
    for (std::size_t ch = 0; ch < 3; ++ch) img.at(y, cx, ch) = bg;

  switch (spec.accessory) {
    case 1: fill_rect(img, 1 + dy, 3 + dy, cx - 4, cx + 4, kHat); break;
    case 2: fill_rect(img, 12 + dy, 18 + dy, cx + half, cx + half + 4, kBag); break;
    case 3: fill_rect(img, 5 + dy, 6 + dy, cx - 3, cx + 3, kGlasses); break;
    default: break;
  }

  for (auto& v : img.pixels()) {
    double x = v + style.illumination_bias;
    if (style.noise_sigma > 0.0) x += rng.normal(0.0, style.noise_sigma);
    v = quantize(x);
  }
  return img;
}

Caption caption_person(const PersonSpec& spec, const DomainStyle& style, Rng& rng) {
  const auto& vocab = Vocabulary::standard();
  auto alias = [&] { return style.color_alias_prob > 0.0 && rng.bernoulli(style.color_alias_prob); };
  const std::string shirt = alias() ? kShirtAliases[spec.shirt] : kShirtNames[spec.shirt];
  const std::string pants = alias() ? kPantsAliases[spec.pants] : kPantsNames[spec.pants];
  const bool gerund = style.caption_register == CaptionRegister::gerund;
  const bool pants_first = rng.bernoulli(0.5);
  const std::string motion = gerund ? (rng.bernoulli(0.5) ? "standing" : "walking")
                                    : (rng.bernoulli(0.5) ? "stands" : "walks");

  std::vector<std::string> w = {"a", kBuildNames[spec.build], "person", motion};
  if (gerund) {
    w.push_back("wearing");
  } else {
    w.insert(w.end(), {"and", "wears"});
  }
  std::vector<std::string> shirt_clause = {"a", shirt, "shirt"};
  std::vector<std::string> pants_clause = {pants, "pants"};
  auto& first = pants_first ? pants_clause : shirt_clause;
  auto& second = pants_first ? shirt_clause : pants_clause;
  w.insert(w.end(), first.begin(), first.end());
  w.push_back("and");
  w.insert(w.end(), second.begin(), second.end());

  switch (spec.accessory) {
    case 1:
      if (gerund) w.insert(w.end(), {"wearing", "a", "hat"});
      else w.insert(w.end(), {"and", "wears", "a", "hat"});
      break;
    case 2:
      if (gerund) w.insert(w.end(), {"carrying", "a", "bag"});
      else w.insert(w.end(), {"and", "carries", "a", "bag"});
      break;
    case 3:
      if (gerund) w.insert(w.end(), {"wearing", "glasses"});
      else w.insert(w.end(), {"and", "has", "glasses"});
      break;
    default: break;
  }

  Caption c;
  for (const auto& t : w) {
    if (c.tokens.size() == kMaxCaptionLength) break;
    c.tokens.push_back(vocab.id(t));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Dataset

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto it = splits.find(samples[i].identity);
    if (it != splits.end() && it->second == s) out.push_back(i);
  }
  return out;
}

std::size_t Dataset::identity_count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(splits.begin(), splits.end(), [s](const auto& kv) { return kv.second == s; }));
}

Dataset generate_dataset(std::size_t n_identities, std::size_t images_per_identity, const DomainStyle& style,
                         Rng& rng) {
  constexpr std::size_t kCombos = kShirtColors * kPantsColors * kAccessories * kBuilds;
  if (n_identities < 2) throw std::invalid_argument("generate_dataset: need at least 2 identities");
  if (n_identities > kCombos) {
    throw std::invalid_argument("generate_dataset: at most " + std::to_string(kCombos) + " identities available");
  }
  if (images_per_identity < 1) throw std::invalid_argument("generate_dataset: need at least 1 image per identity");

  std::vector<std::size_t> codes(kCombos);
  std::iota(codes.begin(), codes.end(), 0);
  rng.shuffle(codes);

  Dataset data;
  data.style = style;
  for (std::size_t id = 0; id < n_identities; ++id) {
    std::size_t code = codes[id];
    PersonSpec p;
    p.identity = static_cast<int>(id);
    p.build = code % kBuilds;
    code /= kBuilds;
    p.accessory = code % kAccessories;
    code /= kAccessories;
    p.pants = code % kPantsColors;
    p.shirt = code / kPantsColors;
    data.people[p.identity] = p;
  }

  std::vector<int> order(n_identities);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::lround(0.7 * static_cast<double>(n_identities)));
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n_identities)));
  for (std::size_t i = 0; i < n_identities; ++i) {
    data.splits[order[i]] = i < n_train ? Split::train : i < n_train + n_val ? Split::val : Split::test;
  }

  for (std::size_t id = 0; id < n_identities; ++id) {
    const auto& person = data.people[static_cast<int>(id)];
    for (std::size_t k = 0; k < images_per_identity; ++k) {
      Rng local = rng.split(id * 4096 + k);
      Sample s;
      s.identity = person.identity;
      s.image_path = "images/" + std::to_string(id) + "_" + std::to_string(k) + ".ppm";
      s.image = render_person(person, style, local);
      s.caption = caption_person(person, style, local);
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(img.pixels()[i], 0.0, 1.0) * 255.0));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w == 0 || h == 0) throw std::runtime_error(path.string() + ": not an 8-bit P6 image");
  is.get();
  std::vector<unsigned char> bytes(w * h * 3);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw std::runtime_error(path.string() + ": truncated pixel data");
  std::vector<double> px(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) px[i] = bytes[i] / 255.0;
  return Image(h, w, 3, std::move(px));
}

void export_dataset(const Dataset& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw std::runtime_error("cannot create " + (dir / "images").string() + ": " + ec.message());
  const auto& vocab = Vocabulary::standard();

  for (const auto& s : data.samples) write_ppm(s.image, dir / s.image_path);

  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("captions.tsv");
    os << "image_path\tidentity\tcaption\n";
    for (const auto& s : data.samples) os << s.image_path << '\t' << s.identity << '\t' << vocab.decode(s.caption) << '\n';
  }
  {
    auto os = open("vocab.txt");
    for (const auto& t : vocab.tokens()) os << t << '\n';
  }
  {
    auto os = open("splits.tsv");
    os << "identity\tsplit\n";
    for (const auto& [id, sp] : data.splits) os << id << '\t' << split_name(sp) << '\n';
  }
}

Dataset import_dataset(const std::filesystem::path& dir) {
  auto open = [&](const char* name) {
    std::ifstream is(dir / name, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + (dir / name).string());
    return is;
  };
  std::vector<std::string> tokens;
  {
    auto is = open("vocab.txt");
    for (std::string line; std::getline(is, line);) tokens.push_back(line);
  }
  if (tokens != Vocabulary::standard().tokens()) {
    throw std::runtime_error((dir / "vocab.txt").string() + " does not match the dataset vocabulary");
  }
  const auto& vocab = Vocabulary::standard();

  Dataset data;
  data.style.name = "imported";
  {
    auto is = open("splits.tsv");
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw std::runtime_error("malformed splits.tsv line: " + line);
      data.splits[std::stoi(line.substr(0, tab))] = split_from_name(line.substr(tab + 1));
    }
  }
  {
    auto is = open("captions.tsv");
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      auto t1 = line.find('\t');
      auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
      if (t1 == std::string::npos || t2 == std::string::npos) {
        throw std::runtime_error("malformed captions.tsv line: " + line);
      }
      Sample s;
      s.image_path = line.substr(0, t1);
      s.identity = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
      s.caption = vocab.encode(line.substr(t2 + 1));
      s.image = read_ppm(dir / s.image_path);
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace camel
