#pragma once

// Newline-delimited JSON protocol that exposes an Environment to external
// agents. See docs/protocol.md for the message schema.

#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "camplace/environment.hpp"
#include "camplace/error.hpp"
#include "json.hpp"

namespace camplace {

inline constexpr int kProtocolVersion = 1;

using nlohmann::json;

struct ObservationBundle {
  Observation observation;
  std::optional<RewardBreakdown> reward;
  bool done = false;

  bool operator==(const ObservationBundle&) const = default;
};

namespace detail {

inline json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 json_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::malformed_message, "expected [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json flat_points(const std::vector<Vec3>& pts) {
  json out = json::array();
  for (const Vec3& p : pts) {
    out.push_back(p.x);
    out.push_back(p.y);
    out.push_back(p.z);
  }
  return out;
}

inline std::vector<Vec3> points_from_flat(const json& j) {
  if (!j.is_array() || j.size() % 3 != 0) {
    throw Error(Errc::malformed_message, "flat point list length must be a multiple of 3");
  }
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < j.size(); i += 3) {
    out.push_back({j[i].get<double>(), j[i + 1].get<double>(), j[i + 2].get<double>()});
  }
  return out;
}

}  // namespace detail

inline json observation_json(const Observation& obs) {
  json o;
  o["points"] = detail::flat_points(obs.observed_points);
  o["bbox_min"] = obs.observed_bbox ? detail::vec3_json(obs.observed_bbox->min) : json(nullptr);
  o["bbox_max"] = obs.observed_bbox ? detail::vec3_json(obs.observed_bbox->max) : json(nullptr);
  o["cameras"] = detail::flat_points(obs.cameras.positions);
  o["step"] = obs.step;
  return o;
}

inline json reward_json(const RewardBreakdown& r) {
  return json{{"sc", r.sc},           {"doe", r.doe},
              {"penalty", r.penalty}, {"delta_sc", r.delta_sc},
              {"delta_doe", r.delta_doe}, {"combined", r.combined},
              {"mapped", r.mapped}};
}

/// Body of an observation response, without the envelope fields.
inline json bundle_json(const ObservationBundle& b) {
  json j;
  j["observation"] = observation_json(b.observation);
  if (b.reward) j["reward"] = reward_json(*b.reward);
  j["done"] = b.done;
  return j;
}

/// Serialized bundle as one line (no trailing newline). Doubles use the
/// shortest representation that round-trips exactly.
inline std::string encode_observation(const Observation& obs,
                                      const std::optional<RewardBreakdown>& reward, bool done) {
  json j = bundle_json({obs, reward, done});
  j["protocol"] = kProtocolVersion;
  return j.dump();
}

inline ObservationBundle decode_observation(const json& j) {
  try {
    ObservationBundle b;
    const json& o = j.at("observation");
    b.observation.observed_points = detail::points_from_flat(o.at("points"));
    if (!o.at("bbox_min").is_null()) {
      b.observation.observed_bbox = Aabb{detail::json_vec3(o.at("bbox_min")),
                                         detail::json_vec3(o.at("bbox_max"))};
    }
    b.observation.cameras.positions = detail::points_from_flat(o.at("cameras"));
    b.observation.step = o.at("step").get<int>();
    if (j.contains("reward")) {
      const json& r = j.at("reward");
      RewardBreakdown rb;
      rb.sc = r.at("sc").get<double>();
      rb.doe = r.at("doe").get<double>();
      rb.penalty = r.at("penalty").get<bool>();
      rb.delta_sc = r.at("delta_sc").get<double>();
      rb.delta_doe = r.at("delta_doe").get<double>();
      rb.combined = r.at("combined").get<double>();
      rb.mapped = r.at("mapped").get<double>();
      b.reward = rb;
    }
    b.done = j.at("done").get<bool>();
    return b;
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_message, e.what());
  }
}

inline ObservationBundle decode_observation(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::malformed_message, "invalid JSON");
  return decode_observation(j);
}

/// Parses either [[dx,dy],...] or a flat [dx,dy,dx,dy,...] action list.
inline std::vector<Action> parse_actions(const json& j) {
  if (!j.is_array()) throw Error(Errc::malformed_message, "actions must be an array");
  std::vector<Action> out;
  if (!j.empty() && j[0].is_array()) {
    for (const json& a : j) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        throw Error(Errc::malformed_message, "each action must be [dx, dy]");
      }
      out.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return out;
  }
  if (j.size() % 2 != 0) throw Error(Errc::action_length_mismatch, "flat action list has odd length");
  for (std::size_t i = 0; i < j.size(); i += 2) {
    if (!j[i].is_number() || !j[i + 1].is_number()) {
      throw Error(Errc::malformed_message, "actions must be numbers");
    }
    out.push_back({j[i].get<double>(), j[i + 1].get<double>()});
  }
  return out;
}

/// One connection's message loop state: exactly one environment and at most
/// one active episode. Every request line yields exactly one response line.
class Session {
 public:
  Session(std::shared_ptr<const PointCloud> scene, const EnvConfig& config)
      : env_(*scene, config) {}

  bool closed() const { return closed_; }
  const Environment& environment() const { return env_; }

  std::string handle(const std::string& line) {
    json id = nullptr;
    try {
      json req = json::parse(line, nullptr, false);
      if (req.is_discarded() || !req.is_object()) {
        throw Error(Errc::malformed_message, "request must be a JSON object");
      }
      if (req.contains("id")) id = req["id"];
      if (!req.contains("cmd") || !req["cmd"].is_string()) {
        throw Error(Errc::malformed_message, "missing cmd");
      }
      const std::string cmd = req["cmd"].get<std::string>();
      json resp;
      if (cmd == "reset") {
        std::uint64_t seed = 0;
        if (req.contains("seed")) {
          if (!req["seed"].is_number_unsigned()) {
            throw Error(Errc::malformed_message, "seed must be a non-negative integer");
          }
          seed = req["seed"].get<std::uint64_t>();
        }
        const Observation obs = env_.reset(seed);
        resp = bundle_json({obs, std::nullopt, false});
        resp["env"] = {{"num_cameras", env_.config().num_cameras},
                       {"max_steps", env_.config().max_steps},
                       {"max_step_move", env_.config().max_step_move}};
      } else if (cmd == "step") {
        if (!req.contains("actions")) throw Error(Errc::malformed_message, "missing actions");
        const auto actions = parse_actions(req["actions"]);
        const StepResult r = env_.step(actions);
        resp = bundle_json({r.observation, r.reward, r.done});
      } else if (cmd == "close") {
        closed_ = true;
        resp = {{"closed", true}};
      } else {
        throw Error(Errc::unknown_command, cmd);
      }
      return envelope(std::move(resp), id);
    } catch (const Error& e) {
      return envelope({{"error", std::string(e.name())}, {"message", e.what()}}, id);
    } catch (const json::exception& e) {
      return envelope({{"error", "malformed-message"}, {"message", e.what()}}, id);
    }
  }

 private:
  static std::string envelope(json body, const json& id) {
    body["protocol"] = kProtocolVersion;
    body["id"] = id;
    return body.dump();
  }

  Environment env_;
  bool closed_ = false;
};

/// Runs a session over a line stream until close or end of input.
inline void serve_stream(std::istream& in, std::ostream& out, Session& session) {
  std::string line;
  while (!session.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out << session.handle(line) << '\n';
    out.flush();
  }
}

}  // namespace camplace
