#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvsde/models.hpp"
#include "mvsde/solver.hpp"

namespace mvsde {

/// One experiment, read from flat "dotted.key = value" text.
///
///   # comment
///   experiment = rate
///   model.id = mf-ou
///   model.theta = 1.0
///   sim.levels = 3,4,5,6,7,8
///
/// Unknown keys, malformed values and duplicate keys are ConfigErrors that
/// name the source and line.
struct ExperimentConfig {
  std::string experiment;  // run | rate | moments | metric | check

  std::string model_id = "mf-ou";
  std::map<std::string, double> model_params;

  std::size_t dimension = 1;
  std::size_t particles = 2000;
  double horizon = 1.0;
  unsigned level = 8;
  std::vector<unsigned> levels{3, 4, 5, 6, 7, 8};
  unsigned finest_level = 12;
  std::uint64_t seed = 1;
  bool streaming = false;
  std::size_t memory_cap_mb = 2048;
  double blowup_threshold = 1e8;

  std::string init_law = "point";  // point | gaussian | uniform
  std::vector<double> init_x0{1.0};
  std::vector<double> init_mean{0.0};
  std::vector<double> init_cov{1.0};
  std::vector<double> init_lower{-1.0};
  std::vector<double> init_upper{1.0};

  std::optional<unsigned> record_level;
  bool record_interpolate = false;

  double p = 1.0;
  std::vector<std::size_t> lags;  // empty: 1, 2, 4, ... up to an eighth of the record grid

  std::optional<std::uint64_t> metric_seed_b;
  double metric_perturb = 0.0;
  std::string metric_coupling = "index";  // index | sorted

  bool rate_synthetic = false;
  std::size_t check_count = 4000;

  std::optional<double> gate_slope_min;
  std::optional<double> gate_slope_max;
  bool gate_monotone = false;
  std::optional<double> gate_exponent_min;
  std::optional<double> gate_exponent_max;
  std::optional<double> gate_moment_se;

  std::string output_dir;

  /// Builds the initial law, broadcasting scalar entries to dimension d.
  LawSpec law() const;
  CoefficientModel model() const;
};

ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Checks every constraint that depends on the experiment kind. Throws
/// ConfigError; never touches the simulator.
void validate_config(const ExperimentConfig& cfg, const std::string& experiment);

}  // namespace mvsde
