#include "mpgrasp/perception_sim.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "mpgrasp/error.h"

namespace mpgrasp {

// Precomputed knots of a jitter trajectory, sampled every kStep seconds and
// interpolated with cubic Hermite segments.
class JitterTrack {
 public:
  static constexpr double kStep = 0.01;

  explicit JitterTrack(const JitterMotion& m) {
    Rng rng(m.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int steps = static_cast<int>(std::ceil(m.horizon / kStep));
    pos_.reserve(steps + 1);
    vel_.reserve(steps + 1);
    Vec3 p = Vec3::Zero(), v = Vec3::Zero(), a = Vec3::Zero();
    pos_.push_back(p);
    vel_.push_back(v);
    const double kick = m.accel_sigma / std::sqrt(kStep);
    for (int k = 0; k < steps; ++k) {
      const Vec3 noise(normal(rng), normal(rng), normal(rng));
      a = kick * noise - m.stiffness * p - m.damping * v;
      v += kStep * a;
      p += kStep * v;
      pos_.push_back(p);
      vel_.push_back(v);
    }
  }

  Vec3 displacement(double t) const {
    if (t <= 0.0) return pos_.front();
    const double s = t / kStep;
    const auto k = static_cast<std::size_t>(std::floor(s));
    if (k + 1 >= pos_.size()) return pos_.back();
    const double u = s - static_cast<double>(k);
    const double h00 = 2 * u * u * u - 3 * u * u + 1;
    const double h10 = u * u * u - 2 * u * u + u;
    const double h01 = -2 * u * u * u + 3 * u * u;
    const double h11 = u * u * u - u * u;
    return h00 * pos_[k] + h10 * kStep * vel_[k] + h01 * pos_[k + 1] +
           h11 * kStep * vel_[k + 1];
  }

 private:
  std::vector<Vec3> pos_;
  std::vector<Vec3> vel_;
};

void SceneObject::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "object id empty");
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "object " + id + " has no labels");
  }
  if ((extents.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument,
                "object " + id + " extents must be positive");
  }
}

void SensorProfile::validate() const {
  const auto prob = [](double p) { return p >= 0.0 && p < 1.0; };
  if (!(rate > 0.0) || latency < 0.0 || sigma_p < 0.0 || sigma_o < 0.0 ||
      !prob(dropout_prob) || !prob(outlier_prob) || !prob(detect_fail_prob) ||
      detect_latency < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid sensor profile");
  }
}

Scene::Scene(std::vector<SceneObject> objects) : objects_(std::move(objects)) {
  std::set<std::string> ids;
  for (const SceneObject& obj : objects_) {
    obj.validate();
    if (!ids.insert(obj.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate object id " + obj.id);
    }
    if (const auto* j = std::get_if<JitterMotion>(&obj.motion)) {
      jitter_.push_back(std::make_shared<const JitterTrack>(*j));
    } else {
      jitter_.push_back(nullptr);
    }
  }
}

const SceneObject& Scene::object(const std::string& id) const {
  for (const SceneObject& obj : objects_) {
    if (obj.id == id) return obj;
  }
  throw Error(ErrorCode::kUnknownObject, "no object with id " + id);
}

bool Scene::contains(const std::string& id) const {
  return std::any_of(objects_.begin(), objects_.end(),
                     [&](const SceneObject& o) { return o.id == id; });
}

Pose Scene::truth(const std::string& id, double t) const {
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const SceneObject& obj = objects_[i];
    if (obj.id != id) continue;
    Pose pose = obj.initial_pose;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearMotion>) {
            pose.p += m.velocity * std::clamp(t, 0.0, m.duration);
          } else if constexpr (std::is_same_v<T, SinusoidMotion>) {
            const Vec3 axis = m.axis.normalized();
            pose.p += axis * m.amplitude *
                      std::sin(2.0 * std::numbers::pi * m.frequency * t);
          } else if constexpr (std::is_same_v<T, JitterMotion>) {
            pose.p += jitter_[i]->displacement(t);
          }
        },
        obj.motion);
    return pose;
  }
  throw Error(ErrorCode::kUnknownObject, "no object with id " + id);
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

const std::string& canonical(const std::string& token) {
  static const std::unordered_map<std::string, std::string> kSynonyms = {
      {"plier", "pliers"},  {"cube", "block"},       {"brick", "block"},
      {"spanner", "wrench"}, {"screwdrivers", "screwdriver"},
      {"drills", "drill"},   {"blocks", "block"},    {"grey", "gray"},
  };
  const auto it = kSynonyms.find(token);
  return it == kSynonyms.end() ? token : it->second;
}

bool is_command_word(const std::string& token) {
  static const std::set<std::string> kCommand = {
      "please", "grasp", "grab", "pick", "up", "take", "get", "fetch",
      "bring", "hand", "me", "the", "a", "an", "hold", "lift", "now",
      "can", "you", "could", "robot"};
  return kCommand.contains(token);
}

std::set<std::string> canonical_set(const std::vector<std::string>& tokens) {
  std::set<std::string> out;
  for (const auto& t : tokens) out.insert(canonical(t));
  return out;
}

}  // namespace

Detection resolve_prompt(const std::string& prompt, const Scene& scene,
                         const SensorProfile& profile, Rng& rng) {
  std::vector<std::string> tokens = tokenize(prompt);
  if (tokens.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "prompt is empty");
  }
  std::size_t first = 0;
  while (first < tokens.size() && is_command_word(tokens[first])) ++first;
  std::vector<std::string> phrase;
  for (std::size_t i = first; i < tokens.size(); ++i) {
    if (tokens[i] != "the" && tokens[i] != "a" && tokens[i] != "an") {
      phrase.push_back(tokens[i]);
    }
  }
  const std::set<std::string> query = canonical_set(phrase);

  int best = 0;
  std::vector<const SceneObject*> winners;
  for (const SceneObject& obj : scene.objects()) {
    int score = 0;
    for (const std::string& label : obj.labels) {
      const std::set<std::string> words = canonical_set(tokenize(label));
      int overlap = 0;
      for (const auto& w : query) overlap += words.contains(w) ? 1 : 0;
      score = std::max(score, overlap);
    }
    if (score == 0) continue;
    if (score > best) {
      best = score;
      winners = {&obj};
    } else if (score == best) {
      winners.push_back(&obj);
    }
  }
  if (winners.empty()) {
    throw Error(ErrorCode::kNoMatch, "no object matches '" + prompt + "'");
  }
  if (winners.size() > 1) {
    throw Error(ErrorCode::kAmbiguous,
                "'" + prompt + "' matches " + winners[0]->id + " and " +
                    winners[1]->id);
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (uniform(rng) < profile.detect_fail_prob) {
    throw Error(ErrorCode::kDetectionFailed, "detector missed the object");
  }
  return {winners.front()->id, profile.detect_latency};
}

Pose object_pose_truth(const Scene& scene, const std::string& id, double t) {
  return scene.truth(id, t);
}

std::optional<PoseMeasurement> sample_measurement(const Pose& truth, double t,
                                                  const SensorProfile& profile,
                                                  Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool dropout = uniform(rng) < profile.dropout_prob;
  const bool outlier = uniform(rng) < profile.outlier_prob;
  Vec3 np, no;
  for (int i = 0; i < 3; ++i) np(i) = normal(rng);
  for (int i = 0; i < 3; ++i) no(i) = normal(rng);
  if (dropout) return std::nullopt;
  const double scale = outlier ? profile.outlier_scale : 1.0;
  PoseMeasurement z;
  z.timestamp = t;
  z.p = truth.p + scale * profile.sigma_p * np;
  z.o = EulerAngles::wrapped(rot_to_euler(truth.R).o +
                             scale * profile.sigma_o * no);
  return z;
}

std::optional<PoseMeasurement> sense_pose(const Scene& scene,
                                          const std::string& id, double t,
                                          const SensorProfile& profile,
                                          Rng& rng) {
  const Pose truth = scene.truth(id, t - profile.latency);
  return sample_measurement(truth, t, profile, rng);
}

}  // namespace mpgrasp
