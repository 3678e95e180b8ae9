#include "hardhat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "hardhat/error.hpp"
#include "hardhat/file_util.hpp"

namespace hardhat::synth {

namespace {

constexpr int kSpecVersion = 1;
constexpr std::int64_t kPersonId = 1;
constexpr std::int64_t kHatId = 2;

// Portable draws from raw 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double uniform(const Range& r) { return uniform(r.lo, r.hi); }
  bool bernoulli(double p) { return uniform() < p; }
  int integer(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }
  double normal(double mean, double stddev) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
}

void check_range(const Range& r, const char* name) {
  if (!(r.lo > 0.0 && r.hi >= r.lo && std::isfinite(r.hi))) {
    throw ValidationError(std::string(name) + " must satisfy 0 < lo <= hi");
  }
}

double draw_score(Rng& rng, const SceneSpec& spec) {
  const double s = spec.score_noise == ScoreNoise::uniform ? rng.uniform(spec.score_a, spec.score_b)
                                                           : rng.normal(spec.score_a, spec.score_b);
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

void SceneSpec::validate() const {
  if (image_count < 0) throw ValidationError("image_count must be >= 0");
  if (persons_min < 0 || persons_max < persons_min) {
    throw ValidationError("persons range must satisfy 0 <= min <= max");
  }
  check_probability(wearer_probability, "wearer_probability");
  check_probability(keypoint_probability, "keypoint_probability");
  check_probability(false_positive_rate, "false_positive_rate");
  check_probability(drop_rate, "drop_rate");
  check_range(person_width, "person_width");
  check_range(person_height, "person_height");
  check_probability(head_fraction, "head_fraction");
  if (!(hat_width_fraction > 0.0 && hat_width_fraction <= 1.0) ||
      !(hat_height_fraction > 0.0 && hat_height_fraction <= 1.0)) {
    throw ValidationError("hat fractions must lie in (0, 1]");
  }
  if (image_width < 1 || image_height < 1) throw ValidationError("image size must be positive");
  if (!(box_jitter >= 0.0 && box_jitter < 1.0)) throw ValidationError("box_jitter must lie in [0, 1)");
  if (!(keypoint_jitter >= 0.0 && keypoint_jitter < 1.0)) {
    throw ValidationError("keypoint_jitter must lie in [0, 1)");
  }
  if (score_noise == ScoreNoise::uniform) {
    if (!(score_a >= 0.0 && score_b <= 1.0 && score_a <= score_b)) {
      throw ValidationError("uniform score bounds must satisfy 0 <= a <= b <= 1");
    }
  } else if (!(score_b >= 0.0) || !std::isfinite(score_a)) {
    throw ValidationError("normal score noise needs a finite mean and stddev >= 0");
  }
}

Scene generate(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  Dataset& gt = scene.ground_truth;
  const Category person_cat{kPersonId, CategoryKind::person};
  const Category hat_cat{kHatId, CategoryKind::hard_hat};
  gt.categories = {person_cat, hat_cat};

  std::int64_t next_gt = 1;
  for (int i = 1; i <= spec.image_count; ++i) {
    gt.images.push_back(ImageInfo{i, spec.image_width, spec.image_height, "synthetic_" + std::to_string(i) + ".jpg"});
    const int persons = rng.integer(spec.persons_min, spec.persons_max);
    const double slot = static_cast<double>(spec.image_width) / std::max(persons, 1);
    for (int j = 0; j < persons; ++j) {
      const double w = std::min(rng.uniform(spec.person_width), slot);
      const double h = std::min(rng.uniform(spec.person_height), static_cast<double>(spec.image_height));
      const double x = slot * j + rng.uniform() * (slot - w);
      const double y = rng.uniform() * (spec.image_height - h);
      const bool labeled = rng.bernoulli(spec.keypoint_probability);
      const bool wearer = rng.bernoulli(spec.wearer_probability);

      Instance person;
      person.id = next_gt++;
      person.image_id = i;
      person.category = person_cat;
      person.bbox = BBox{x, y, w, h};
      const Keypoint head{x + w / 2.0, y + spec.head_fraction * h, 2};
      if (labeled) {
        person.head_keypoint = head;
        scene.wearer_truth.emplace_back(person.id, wearer);
      }
      gt.instances.push_back(person);

      if (wearer) {
        const double hw = spec.hat_width_fraction * w;
        const double hh = spec.hat_height_fraction * h;
        Instance hat;
        hat.id = next_gt++;
        hat.image_id = i;
        hat.category = hat_cat;
        hat.bbox = BBox{head.x - hw / 2.0, head.y - hh / 2.0, hw, hh};
        gt.instances.push_back(hat);
      }
    }
  }

  std::int64_t next_det = 1;
  for (const Instance& g : gt.instances) {
    const bool dropped = rng.uniform() < spec.drop_rate;
    const double jx = rng.uniform(-1.0, 1.0) * spec.box_jitter;
    const double jy = rng.uniform(-1.0, 1.0) * spec.box_jitter;
    const double jw = rng.uniform(-1.0, 1.0) * spec.box_jitter;
    const double jh = rng.uniform(-1.0, 1.0) * spec.box_jitter;
    const double kx = rng.uniform(-1.0, 1.0) * spec.keypoint_jitter;
    const double ky = rng.uniform(-1.0, 1.0) * spec.keypoint_jitter;
    const double score = draw_score(rng, spec);

    const bool spurious = rng.uniform() < spec.false_positive_rate;
    const bool fp_is_person = rng.bernoulli(0.5);
    const double fw = rng.uniform(spec.person_width);
    const double fh = rng.uniform(spec.person_height);
    const double fx = rng.uniform();
    const double fy = rng.uniform();
    const double fk = rng.uniform();
    const double fp_score = draw_score(rng, spec);

    if (!dropped) {
      Instance d = g;
      d.id = next_det++;
      const BBox& b = g.bbox;
      d.bbox = BBox{b.x + jx * b.w, b.y + jy * b.h, b.w * (1.0 + jw), b.h * (1.0 + jh)};
      if (g.head_keypoint) {
        d.head_keypoint = Keypoint{g.head_keypoint->x + kx * b.w, g.head_keypoint->y + ky * b.h, 2};
      }
      d.score = score;
      scene.detections.push_back(std::move(d));
    }
    if (spurious) {
      Instance d;
      d.id = next_det++;
      d.image_id = g.image_id;
      d.category = fp_is_person ? person_cat : hat_cat;
      const double w = fp_is_person ? fw : fw * spec.hat_width_fraction;
      const double h = fp_is_person ? fh : fh * spec.hat_height_fraction;
      d.bbox = BBox{fx * std::max(0.0, spec.image_width - w), fy * std::max(0.0, spec.image_height - h), w, h};
      if (fp_is_person) d.head_keypoint = Keypoint{d.bbox.x + w / 2.0, d.bbox.y + fk * h, 2};
      d.score = fp_score;
      scene.detections.push_back(std::move(d));
    }
  }
  return scene;
}

SceneSpec scene_spec_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scene spec: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scene spec: root must be an object");
  SceneSpec s;
  try {
    if (j.value("version", kSpecVersion) != kSpecVersion) throw ParseError("scene spec: unsupported version");
    auto range = [&](const char* key, Range& r) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      r = Range{v.at(0).get<double>(), v.at(1).get<double>()};
    };
    s.image_count = j.value("image_count", s.image_count);
    s.persons_min = j.value("persons_min", s.persons_min);
    s.persons_max = j.value("persons_max", s.persons_max);
    s.wearer_probability = j.value("wearer_probability", s.wearer_probability);
    s.keypoint_probability = j.value("keypoint_probability", s.keypoint_probability);
    range("person_width", s.person_width);
    range("person_height", s.person_height);
    s.head_fraction = j.value("head_fraction", s.head_fraction);
    s.hat_width_fraction = j.value("hat_width_fraction", s.hat_width_fraction);
    s.hat_height_fraction = j.value("hat_height_fraction", s.hat_height_fraction);
    s.image_width = j.value("image_width", s.image_width);
    s.image_height = j.value("image_height", s.image_height);
    s.box_jitter = j.value("box_jitter", s.box_jitter);
    s.keypoint_jitter = j.value("keypoint_jitter", s.keypoint_jitter);
    const std::string noise = j.value("score_noise", std::string("uniform"));
    if (noise == "uniform") {
      s.score_noise = ScoreNoise::uniform;
    } else if (noise == "normal") {
      s.score_noise = ScoreNoise::normal;
    } else {
      throw ParseError("scene spec: score_noise must be 'uniform' or 'normal'");
    }
    s.score_a = j.value("score_a", s.score_a);
    s.score_b = j.value("score_b", s.score_b);
    s.false_positive_rate = j.value("false_positive_rate", s.false_positive_rate);
    s.drop_rate = j.value("drop_rate", s.drop_rate);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string to_json(const SceneSpec& s) {
  nlohmann::ordered_json j;
  j["version"] = kSpecVersion;
  j["image_count"] = s.image_count;
  j["persons_min"] = s.persons_min;
  j["persons_max"] = s.persons_max;
  j["wearer_probability"] = s.wearer_probability;
  j["keypoint_probability"] = s.keypoint_probability;
  j["person_width"] = {s.person_width.lo, s.person_width.hi};
  j["person_height"] = {s.person_height.lo, s.person_height.hi};
  j["head_fraction"] = s.head_fraction;
  j["hat_width_fraction"] = s.hat_width_fraction;
  j["hat_height_fraction"] = s.hat_height_fraction;
  j["image_width"] = s.image_width;
  j["image_height"] = s.image_height;
  j["box_jitter"] = s.box_jitter;
  j["keypoint_jitter"] = s.keypoint_jitter;
  j["score_noise"] = s.score_noise == ScoreNoise::uniform ? "uniform" : "normal";
  j["score_a"] = s.score_a;
  j["score_b"] = s.score_b;
  j["false_positive_rate"] = s.false_positive_rate;
  j["drop_rate"] = s.drop_rate;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  return scene_spec_from_json(read_file(path));
}

}  // namespace hardhat::synth
