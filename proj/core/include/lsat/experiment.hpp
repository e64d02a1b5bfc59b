#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsat/datafit.hpp"
#include "lsat/mnist_io.hpp"
#include "lsat/tuner.hpp"

namespace lsat::experiment {

enum class Model { ls, ls_reg2, ls_reg3_feat, ls_reg3_feat_weight };

const char* to_string(Model m) noexcept;
const char* to_string(io::Scale s) noexcept;
// Throw ConfigError for unknown names.
Model parse_model(const std::string& name);
io::Scale parse_scale(const std::string& name);

// Hyper-parameter count of a ladder model: 0, 2, 4 and N + 4.
Eigen::Index ladder_hyperparam_count(Model m, Eigen::Index n_train);

struct ExperimentConfig {
  // Directory holding the IDX pair files (train-*, t10k-*) or, failing
  // that, train.csv and test.csv.
  std::filesystem::path data_path;
  io::Scale scale = io::Scale::small;
  // Only read for Scale::custom.
  io::SplitSizes custom_sizes;
  Model model = Model::ls;
  std::uint64_t seed = 0;
  tuner::TunerConfig tuner{1.0, 300, 1e-6, 1.2, 0.5};
  bool early_stopping = false;
  std::size_t patience = 5;
  std::size_t k_per_class = 5;
  std::filesystem::path output_path;

  io::SplitSizes sizes() const { return scale == io::Scale::custom ? custom_sizes : io::sizes_for(scale); }
  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

// Test data that counts how often it is read.
class HeldOutSet {
 public:
  explicit HeldOutSet(fit::Dataset data) : data_(std::move(data)) {}
  const fit::Dataset& access() {
    ++accesses_;
    return data_;
  }
  std::size_t accesses() const noexcept { return accesses_; }

 private:
  fit::Dataset data_;
  std::size_t accesses_ = 0;
};

// Tracks a monitor loss over accepted iterates and signals a stop after
// `patience` consecutive increases.
class EarlyStopMonitor {
 public:
  explicit EarlyStopMonitor(std::size_t patience = 5);
  // Records the next loss; true once the stop condition holds.
  bool observe(double loss);
  std::size_t consecutive_increases() const noexcept { return increases_; }

 private:
  std::size_t patience_;
  std::size_t increases_ = 0;
  std::optional<double> last_;
};

// Replays `losses` (first entry is the baseline) through a monitor; true if
// it would have stopped.
bool should_stop(const std::vector<double>& losses, std::size_t patience);

struct TraceEntry {
  tuner::TunerIteration iteration;
  std::optional<double> monitor_loss;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<TraceEntry> trace;
  std::string termination;  // "none" when nothing is tuned
  double validation_loss = 0.0;
  double test_error = 0.0;
  Eigen::Index hyperparam_count = 0;
  double wall_seconds = 0.0;
  std::size_t test_set_accesses = 0;
  Vector feat_omega;
  Vector reg_omega;
  // Rows of the training file with the lowest / highest data weights,
  // weighting model only.
  std::vector<std::size_t> lowest_weight_rows;
  std::vector<std::size_t> highest_weight_rows;
};

nlohmann::json to_json(const RunReport& r);

// Training pool, validation set, optional early-stopping monitor and the
// held-out test set.
struct ExperimentData {
  io::LabeledImages train;
  io::LabeledImages val;
  std::vector<std::size_t> train_rows;  // rows of the training file
  std::optional<fit::Dataset> monitor;
  fit::Dataset test;
};

// Loads and splits per the config. Throws DataError subclasses.
ExperimentData load_data(const ExperimentConfig& cfg);

// A ready-to-tune ladder model.
struct LadderModel {
  fit::FitProblem problem;
  HyperVector omega0;
  std::shared_ptr<const prox::ProxRegularizer> regularizer;
};

LadderModel build_model(Model model, const io::LabeledImages& train, const io::LabeledImages& val,
                        std::size_t k_per_class, std::uint64_t seed);

// Runs one ladder entry end to end; writes the report to cfg.output_path
// when set.
RunReport run_experiment(const ExperimentConfig& cfg);
RunReport run_experiment(const ExperimentConfig& cfg, ExperimentData data);

}  // namespace lsat::experiment
