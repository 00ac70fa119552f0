#pragma once

#include "vmckit/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vmckit {

/// Experiment configuration, read from an INI file with sections
/// [system] [ansatz] [sampler] [optim] [pretrain] [run].
/// Unknown sections or keys are rejected.
struct ExperimentConfig {
  struct System {
    /// finite | ho1d | hatom | pretrain_finite | pretrain_gauss | pretrain_toy
    std::string kind = "finite";
    Index size = 4;
    /// Diagonal of the path Hamiltonian (finite); empty selects a default.
    std::vector<double> diagonal;
    /// Target values (pretrain_finite); empty draws a random unit vector from target_seed.
    std::vector<double> target;
    std::uint64_t target_seed = 1;
    double half_width = 6.0;
    Index electrons = 2;
    bool operator==(const System&) const = default;
  } system;

  struct Ansatz {
    /// table | expfamily | mlp | matrix_mlp
    std::string kind = "table";
    /// expfamily on a box: feature names; on a finite space: "cosine:<d>"
    std::vector<std::string> features;
    std::vector<Index> hidden = {16, 16};
    Index determinants = 1;
    /// Initial parameters; empty selects the per-system default.
    std::vector<double> theta0;
    bool operator==(const Ansatz&) const = default;
  } ansatz;

  struct Sampler {
    std::string kind = "exact";  ///< exact | metropolis
    double step_size = 0.0;      ///< <= 0 tunes toward 50% acceptance
    Index burn_in = 500;
    Index thinning = 10;
    Index walkers = 256;         ///< walkers of the target-induced rho sampler
    bool operator==(const Sampler&) const = default;
  } sampler;

  struct Optim {
    Index n = 16;
    Index steps = 1000;
    std::string schedule = "inverse_sqrt";  ///< constant | inverse_sqrt | h4
    double eta0 = 0.05;
    double m0 = 10000.0;
    bool operator==(const Optim&) const = default;
  } optim;

  struct Pretrain {
    std::string strategy = "same_batch";  ///< same_batch | independent_batch | periodic
    Index period = 100;
    Index norm_batch = 0;
    std::string rho = "target";  ///< target | lebesgue
    std::string loss = "si";     ///< si | mse (pretrain_toy)
    Index eval_points = 2048;
    Index seeds = 1;             ///< compare-pretrain repeats over seed .. seed + seeds - 1
    bool operator==(const Pretrain&) const = default;
  } pretrain;

  struct Run {
    std::uint64_t seed = 0;
    std::string out = "out";
    int threads = 1;
    bool operator==(const Run&) const = default;
  } run;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text, const std::string& name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);
/// Cross-field checks; throws ConfigError.
void validate_config(const ExperimentConfig& cfg);

}  // namespace vmckit
