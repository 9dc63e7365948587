#include "camel/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace camel::cli {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool parse_bool(const std::string& v, bool& out) {
  const auto s = lower(v);
  if (s == "on" || s == "true" || s == "yes" || s == "1") return out = true, true;
  if (s == "off" || s == "false" || s == "no" || s == "0") return out = false, true;
  return false;
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile f;
  f.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (f.values_.count(full)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + full + "'");
    }
    f.values_[full] = trim(line.substr(eq + 1));
    f.lines_[full] = lineno;
  }
  return f;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

const std::string* KeyValueFile::lookup(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  read_.insert(key);
  return &it->second;
}

void KeyValueFile::fail(const std::string& key, const std::string& why) const {
  std::string where = origin_;
  if (auto it = lines_.find(key); it != lines_.end()) where += ":" + std::to_string(it->second);
  throw ConfigError(where + ": " + key + ": " + why);
}

template <>
void KeyValueFile::read(const std::string& key, std::string& target) const {
  if (auto v = lookup(key)) target = *v;
}

template <>
void KeyValueFile::read(const std::string& key, std::filesystem::path& target) const {
  if (auto v = lookup(key)) target = *v;
}

template <>
void KeyValueFile::read(const std::string& key, bool& target) const {
  if (auto v = lookup(key); v && !parse_bool(*v, target)) fail(key, "expected on/off, got '" + *v + "'");
}

template <>
void KeyValueFile::read(const std::string& key, double& target) const {
  auto v = lookup(key);
  if (!v) return;
  const char* end = v->data() + v->size();
  auto [p, ec] = std::from_chars(v->data(), end, target);
  if (ec != std::errc() || p != end) fail(key, "expected a number, got '" + *v + "'");
}

template <>
void KeyValueFile::read(const std::string& key, std::size_t& target) const {
  auto v = lookup(key);
  if (!v) return;
  const char* end = v->data() + v->size();
  auto [p, ec] = std::from_chars(v->data(), end, target);
  if (ec != std::errc() || p != end) fail(key, "expected a non-negative integer, got '" + *v + "'");
}

std::set<std::string> KeyValueFile::unused() const {
  std::set<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!read_.count(k)) out.insert(k);
  }
  return out;
}

// ---------------------------------------------------------------------------

void apply_toggles(Toggles& toggles, const std::string& spec) {
  std::istringstream in(spec);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("toggle '" + item + "' is not of the form name=on|off");
    const auto name = lower(trim(item.substr(0, eq)));
    bool value = false;
    if (!parse_bool(trim(item.substr(eq + 1)), value)) throw ConfigError("toggle '" + item + "': expected on or off");
    if (name == "st") {
      toggles.st = value;
    } else if (name == "adsu") {
      toggles.adsu = value;
    } else if (name == "cmml") {
      toggles.cmml = value;
    } else {
      throw ConfigError("unknown component '" + name + "' (expected st, adsu or cmml)");
    }
  }
}

RunConfig parse_run_config(const KeyValueFile& f) {
  RunConfig c;
  std::size_t seed = c.seed;
  f.read("run.seed", seed);
  c.seed = seed;
  f.read("run.out", c.out);

  auto& d = c.data;
  f.read("data.identities", d.identities);
  f.read("data.images_per_identity", d.images_per_identity);
  f.read("data.train_style", d.train_style);
  f.read("data.eval_style", d.eval_style);
  f.read("data.train_dir", d.train_dir);
  f.read("data.eval_dir", d.eval_dir);

  auto& e = c.train.encoder;
  f.read("model.image_size", e.image_size);
  f.read("model.patch", e.patch);
  f.read("model.embed_dim", e.embed_dim);
  f.read("model.hidden_dim", e.hidden_dim);
  f.read("model.temperature", e.temperature);
  f.read("model.itm_weight", e.itm_weight);
  f.read("model.negatives_per_pair", e.negatives_per_pair);

  auto& m = c.train.meta;
  f.read("meta.inner_lr", m.inner_lr);
  f.read("meta.inner_iters", m.inner_iters);
  f.read("meta.eps_fast", m.eps_fast);
  f.read("meta.eps_slow", m.eps_slow);
  f.read("meta.k", m.k);
  std::string unit = m.k_unit == SlowCycleUnit::tasks ? "tasks" : "meta_epochs";
  f.read("meta.k_unit", unit);
  if (unit == "tasks") {
    m.k_unit = SlowCycleUnit::tasks;
  } else if (unit == "meta_epochs") {
    m.k_unit = SlowCycleUnit::meta_epochs;
  } else {
    throw ConfigError("meta.k_unit: expected tasks or meta_epochs, got '" + unit + "'");
  }
  f.read("meta.num_tasks", m.num_tasks);
  f.read("meta.swa_every", m.swa_every);
  f.read("meta.parallel_start", m.parallel_start);
  std::string order = m.random_task_order ? "random" : "fixed";
  f.read("meta.task_order", order);
  if (order != "fixed" && order != "random") {
    throw ConfigError("meta.task_order: expected fixed or random, got '" + order + "'");
  }
  m.random_task_order = order == "random";

  auto& s = c.train.stylize;
  f.read("augment.brightness_min", s.illumination.brightness_min);
  f.read("augment.brightness_max", s.illumination.brightness_max);
  f.read("augment.contrast_min", s.illumination.contrast_min);
  f.read("augment.contrast_max", s.illumination.contrast_max);
  f.read("augment.rotate_prob", s.illumination.rotate_prob);
  f.read("augment.max_rotation_degrees", s.illumination.max_rotation_degrees);
  f.read("augment.crop_prob", s.illumination.crop_prob);
  f.read("augment.min_crop_area", s.illumination.min_crop_area);
  f.read("augment.blur_sigma_min", s.blur_sigma_min);
  f.read("augment.blur_sigma_max", s.blur_sigma_max);
  f.read("augment.replace_prob", s.text.replace_prob);
  f.read("augment.swap_prob", s.text.swap_prob);
  f.read("augment.delete_prob", s.text.delete_prob);
  f.read("augment.insert_prob", s.text.insert_prob);
  f.read("augment.mixup_delta", s.mixup.delta);

  auto& t = c.train;
  f.read("train.phase_a_epochs", t.phase_a_epochs);
  f.read("train.phase_b_epochs", t.phase_b_epochs);
  f.read("train.batch_size", t.batch_size);
  f.read("train.memory_ratio", t.memory_ratio);
  f.read("train.finetune_lr", t.finetune_lr);

  f.read("toggles.st", t.toggles.st);
  f.read("toggles.adsu", t.toggles.adsu);
  f.read("toggles.cmml", t.toggles.cmml);

  f.read("eval.max_mask", c.eval.max_mask);
  f.read("eval.per_epoch", c.eval.per_epoch);

  f.read("ablate.sweep", c.ablate.sweep);
  f.read("ablate.seeds", c.ablate.seeds);

  if (auto extra = f.unused(); !extra.empty()) throw ConfigError("unknown config key '" + *extra.begin() + "'");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return parse_run_config(KeyValueFile::load(path)); }

void RunConfig::validate() const {
  try {
    train.validate();
    DomainStyle::by_name(data.train_style);
    DomainStyle::by_name(data.eval_style);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.identities < 2) throw ConfigError("data.identities must be at least 2");
  if (data.images_per_identity < 1) throw ConfigError("data.images_per_identity must be at least 1");
  if (train.stylize.blur_sigma_min <= 0.0 || train.stylize.blur_sigma_max < train.stylize.blur_sigma_min) {
    throw ConfigError("augment.blur_sigma_min/max must satisfy 0 < min <= max");
  }
  if (ablate.sweep != "components" && ablate.sweep != "memory" && ablate.sweep != "k") {
    throw ConfigError("ablate.sweep must be components, memory or k");
  }
  if (ablate.seeds < 1) throw ConfigError("ablate.seeds must be at least 1");
}

std::string dump_run_config(const RunConfig& c) {
  std::ostringstream o;
  o << std::setprecision(17);
  auto onoff = [](bool b) { return b ? "on" : "off"; };
  const auto& m = c.train.meta;
  const auto& e = c.train.encoder;
  const auto& s = c.train.stylize;
  o << "[run]\nseed = " << c.seed << "\nout = " << c.out.string() << "\n\n";
  o << "[data]\nidentities = " << c.data.identities << "\nimages_per_identity = " << c.data.images_per_identity
    << "\ntrain_style = " << c.data.train_style << "\neval_style = " << c.data.eval_style << "\n";
  if (!c.data.train_dir.empty()) o << "train_dir = " << c.data.train_dir.string() << "\n";
  if (!c.data.eval_dir.empty()) o << "eval_dir = " << c.data.eval_dir.string() << "\n";
  o << "\n[model]\nimage_size = " << e.image_size << "\npatch = " << e.patch << "\nembed_dim = " << e.embed_dim
    << "\nhidden_dim = " << e.hidden_dim << "\ntemperature = " << e.temperature << "\nitm_weight = " << e.itm_weight
    << "\nnegatives_per_pair = " << e.negatives_per_pair << "\n\n";
  o << "[meta]\ninner_lr = " << m.inner_lr << "\ninner_iters = " << m.inner_iters << "\neps_fast = " << m.eps_fast
    << "\neps_slow = " << m.eps_slow << "\nk = " << m.k
    << "\nk_unit = " << (m.k_unit == SlowCycleUnit::tasks ? "tasks" : "meta_epochs") << "\nnum_tasks = " << m.num_tasks
    << "\nswa_every = " << m.swa_every << "\nparallel_start = " << onoff(m.parallel_start)
    << "\ntask_order = " << (m.random_task_order ? "random" : "fixed") << "\n\n";
  o << "[augment]\nbrightness_min = " << s.illumination.brightness_min
    << "\nbrightness_max = " << s.illumination.brightness_max << "\ncontrast_min = " << s.illumination.contrast_min
    << "\ncontrast_max = " << s.illumination.contrast_max << "\nrotate_prob = " << s.illumination.rotate_prob
    << "\nmax_rotation_degrees = " << s.illumination.max_rotation_degrees
    << "\ncrop_prob = " << s.illumination.crop_prob << "\nmin_crop_area = " << s.illumination.min_crop_area
    << "\nblur_sigma_min = " << s.blur_sigma_min << "\nblur_sigma_max = " << s.blur_sigma_max
    << "\nreplace_prob = " << s.text.replace_prob << "\nswap_prob = " << s.text.swap_prob
    << "\ndelete_prob = " << s.text.delete_prob << "\ninsert_prob = " << s.text.insert_prob
    << "\nmixup_delta = " << s.mixup.delta << "\n\n";
  o << "[train]\nphase_a_epochs = " << c.train.phase_a_epochs << "\nphase_b_epochs = " << c.train.phase_b_epochs
    << "\nbatch_size = " << c.train.batch_size << "\nmemory_ratio = " << c.train.memory_ratio
    << "\nfinetune_lr = " << c.train.finetune_lr << "\n\n";
  o << "[toggles]\nst = " << onoff(c.train.toggles.st) << "\nadsu = " << onoff(c.train.toggles.adsu)
    << "\ncmml = " << onoff(c.train.toggles.cmml) << "\n\n";
  o << "[eval]\nmax_mask = " << c.eval.max_mask << "\nper_epoch = " << onoff(c.eval.per_epoch) << "\n\n";
  o << "[ablate]\nsweep = " << c.ablate.sweep << "\nseeds = " << c.ablate.seeds << "\n";
  return o.str();
}

}  // namespace camel::cli
