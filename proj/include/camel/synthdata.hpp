#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "camel/image.hpp"
#include "camel/rng.hpp"

namespace camel {

/// Token table with [UNK]=0, [PAD]=1 and disjoint synonym groups.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> tokens, const std::vector<std::vector<std::string>>& synonym_groups);

  /// The fixed vocabulary used by the procedural person dataset.
  static const Vocabulary& standard();

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Every member of `id`'s synonym group including `id`; empty if ungrouped.
  std::span<const int> synonyms(int id) const;
  const std::vector<std::vector<int>>& synonym_groups() const { return groups_; }

  Caption encode(const std::string& text) const;
  std::string decode(const Caption& caption) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && groups_ == o.groups_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  std::vector<std::vector<int>> groups_;
  std::vector<int> group_of_;
};

inline constexpr std::size_t kShirtColors = 8;
inline constexpr std::size_t kPantsColors = 8;
inline constexpr std::size_t kAccessories = 4;
inline constexpr std::size_t kBuilds = 2;
inline constexpr std::size_t kImageSize = 32;

struct Rgb {
  int r, g, b;  // 8-bit components; palette values are exact multiples of 1/255
  double channel(std::size_t c) const { return (c == 0 ? r : c == 1 ? g : b) / 255.0; }
};

const std::array<Rgb, kShirtColors>& shirt_palette();
const std::array<Rgb, kPantsColors>& pants_palette();
/// Canonical token name of each attribute value.
const std::string& shirt_color_name(std::size_t i);
const std::string& pants_color_name(std::size_t i);
const std::string& accessory_name(std::size_t i);  // "none", "hat", "bag", "glasses"
const std::string& build_name(std::size_t i);      // "slim", "broad"

struct PersonSpec {
  int identity = 0;
  std::size_t shirt = 0, pants = 0, accessory = 0, build = 0;
  std::size_t attribute_code() const;
  bool operator==(const PersonSpec&) const = default;
};

enum class CaptionRegister { gerund, verb };

struct DomainStyle {
  std::string name;
  double illumination_bias = 0.0;
  double noise_sigma = 0.0;
  CaptionRegister caption_register = CaptionRegister::gerund;
  /// Chance that a color is named by the non-canonical member of its synonym pair.
  double color_alias_prob = 0.0;

  static DomainStyle synthetic();
  static DomainStyle realistic();
  static DomainStyle by_name(const std::string& name);
};

/// Tokens only the gerund register uses.
const std::vector<std::string>& gerund_tokens();

/// Rows/cols that fall inside the torso for every jittered layout.
inline constexpr std::size_t kTorsoProbeRowBegin = 11, kTorsoProbeRowEnd = 18;
inline constexpr std::size_t kTorsoProbeColBegin = 15, kTorsoProbeColEnd = 17;

Image render_person(const PersonSpec& spec, const DomainStyle& style, Rng& rng);
Caption caption_person(const PersonSpec& spec, const DomainStyle& style, Rng& rng);

enum class Split { train, val, test };
const char* split_name(Split s);
Split split_from_name(const std::string& s);

struct Sample {
  std::string image_path;  // relative to the dataset root
  int identity = 0;
  Image image;
  Caption caption;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  DomainStyle style;
  std::vector<Sample> samples;
  std::map<int, Split> splits;
  std::map<int, PersonSpec> people;  // empty after import

  std::vector<std::size_t> indices(Split s) const;
  std::size_t identity_count(Split s) const;
};

/// Identity-disjoint 70/10/20 split by identity; errors when n_identities < 2.
Dataset generate_dataset(std::size_t n_identities, std::size_t images_per_identity, const DomainStyle& style,
                         Rng& rng);

void export_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset import_dataset(const std::filesystem::path& dir);

void write_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace camel
