#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace camplace {

enum class Errc {
  io_error,
  parse_error,
  empty_cloud,
  single_point_cloud,
  duplicate_points,
  k_out_of_range,
  invalid_center_index,
  invalid_dimension,
  zero_direction,
  shape_mismatch,
  camera_mismatch,
  degenerate_bbox,
  invalid_config,
  action_length_mismatch,
  episode_finished,
  episode_not_started,
  unknown_mode,
  invalid_placement,
  infeasible_lattice,
  malformed_message,
  unknown_command,
  bind_failure,
  missing_column,
};

/// Stable kebab-case identifier, also used verbatim on the wire.
constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::io_error: return "io-error";
    case Errc::parse_error: return "parse-error";
    case Errc::empty_cloud: return "empty-cloud";
    case Errc::single_point_cloud: return "single-point-cloud";
    case Errc::duplicate_points: return "duplicate-points";
    case Errc::k_out_of_range: return "k-out-of-range";
    case Errc::invalid_center_index: return "invalid-center-index";
    case Errc::invalid_dimension: return "invalid-dimension";
    case Errc::zero_direction: return "zero-direction";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::camera_mismatch: return "camera-mismatch";
    case Errc::degenerate_bbox: return "degenerate-bbox";
    case Errc::invalid_config: return "invalid-config";
    case Errc::action_length_mismatch: return "action-length-mismatch";
    case Errc::episode_finished: return "episode-finished";
    case Errc::episode_not_started: return "episode-not-started";
    case Errc::unknown_mode: return "unknown-mode";
    case Errc::invalid_placement: return "invalid-placement";
    case Errc::infeasible_lattice: return "infeasible-lattice";
    case Errc::malformed_message: return "malformed-message";
    case Errc::unknown_command: return "unknown-command";
    case Errc::bind_failure: return "bind-failure";
    case Errc::missing_column: return "missing-column";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

}  // namespace camplace
