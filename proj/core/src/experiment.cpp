#include "lsat/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "lsat/errors.hpp"

namespace lsat::experiment {

const char* to_string(Model m) noexcept {
  switch (m) {
    case Model::ls: return "ls";
    case Model::ls_reg2: return "ls_reg2";
    case Model::ls_reg3_feat: return "ls_reg3_feat";
    case Model::ls_reg3_feat_weight: return "ls_reg3_feat_weight";
  }
  return "unknown";
}

const char* to_string(io::Scale s) noexcept {
  switch (s) {
    case io::Scale::small: return "small";
    case io::Scale::full: return "full";
    case io::Scale::custom: return "custom";
  }
  return "unknown";
}

Model parse_model(const std::string& name) {
  for (Model m : {Model::ls, Model::ls_reg2, Model::ls_reg3_feat, Model::ls_reg3_feat_weight}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown model '" + name + "'");
}

io::Scale parse_scale(const std::string& name) {
  for (io::Scale s : {io::Scale::small, io::Scale::full, io::Scale::custom}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown dataset scale '" + name + "'");
}

Eigen::Index ladder_hyperparam_count(Model m, Eigen::Index n_train) {
  switch (m) {
    case Model::ls: return 0;
    case Model::ls_reg2: return 2;
    case Model::ls_reg3_feat: return 4;
    case Model::ls_reg3_feat_weight: return n_train + 4;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  tuner.validate();
  if (data_path.empty()) throw ConfigError("data_path is required");
  const io::SplitSizes s = sizes();
  if (s.train == 0 || s.val == 0) throw ConfigError("train and validation sizes must be positive");
  if (s.train + s.val > s.pool) throw ConfigError("train + validation sizes exceed the pool size");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (k_per_class == 0) throw ConfigError("k_per_class must be at least 1");
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  const io::SplitSizes s = cfg.sizes();
  return {
      {"data_path", cfg.data_path.string()},
      {"scale", to_string(cfg.scale)},
      {"pool_size", s.pool},
      {"train_size", s.train},
      {"val_size", s.val},
      {"model", to_string(cfg.model)},
      {"seed", cfg.seed},
      {"tuner",
       {{"t_init", cfg.tuner.t_init},
        {"max_iter", cfg.tuner.max_iter},
        {"epsilon", cfg.tuner.epsilon},
        {"increase_factor", cfg.tuner.increase_factor},
        {"decrease_factor", cfg.tuner.decrease_factor}}},
      {"early_stopping", cfg.early_stopping},
      {"patience", cfg.patience},
      {"k_per_class", cfg.k_per_class},
      {"output_path", cfg.output_path.string()},
  };
}

namespace {

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError("unknown " + where + " key '" + key + "'");
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"data_path", "scale", "pool_size", "train_size", "val_size", "model", "seed", "tuner",
                  "early_stopping", "patience", "k_per_class", "output_path"},
                 "config");
  ExperimentConfig cfg;
  cfg.data_path = field<std::string>(j, "data_path", "");
  cfg.scale = parse_scale(field<std::string>(j, "scale", "small"));
  const io::SplitSizes base = cfg.scale == io::Scale::custom ? io::SplitSizes{} : io::sizes_for(cfg.scale);
  const bool sized = j.contains("pool_size") || j.contains("train_size") || j.contains("val_size");
  if (sized && cfg.scale != io::Scale::custom) {
    // Sizes are implied by small/full; only accept them if they agree.
    const io::SplitSizes s{field<std::size_t>(j, "pool_size", base.pool), field<std::size_t>(j, "train_size", base.train),
                           field<std::size_t>(j, "val_size", base.val)};
    if (s.pool != base.pool || s.train != base.train || s.val != base.val) {
      throw ConfigError("split sizes can only be set with scale \"custom\"");
    }
  }
  cfg.custom_sizes = {field<std::size_t>(j, "pool_size", base.pool), field<std::size_t>(j, "train_size", base.train),
                      field<std::size_t>(j, "val_size", base.val)};
  cfg.model = parse_model(field<std::string>(j, "model", "ls"));
  cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
  if (j.contains("tuner")) {
    const auto& t = j.at("tuner");
    if (!t.is_object()) throw ConfigError("config field 'tuner' must be an object");
    reject_unknown(t, {"t_init", "max_iter", "epsilon", "increase_factor", "decrease_factor"}, "tuner");
    cfg.tuner.t_init = field<double>(t, "t_init", cfg.tuner.t_init);
    cfg.tuner.max_iter = field<std::size_t>(t, "max_iter", cfg.tuner.max_iter);
    cfg.tuner.epsilon = field<double>(t, "epsilon", cfg.tuner.epsilon);
    cfg.tuner.increase_factor = field<double>(t, "increase_factor", cfg.tuner.increase_factor);
    cfg.tuner.decrease_factor = field<double>(t, "decrease_factor", cfg.tuner.decrease_factor);
  }
  cfg.early_stopping = field<bool>(j, "early_stopping", cfg.early_stopping);
  cfg.patience = field<std::size_t>(j, "patience", cfg.patience);
  cfg.k_per_class = field<std::size_t>(j, "k_per_class", cfg.k_per_class);
  cfg.output_path = field<std::string>(j, "output_path", "");
  cfg.validate();
  return cfg;
}

EarlyStopMonitor::EarlyStopMonitor(std::size_t patience) : patience_(patience) {
  if (patience == 0) throw std::invalid_argument("patience must be at least 1");
}

bool EarlyStopMonitor::observe(double loss) {
  if (last_ && loss > *last_) {
    ++increases_;
  } else {
    increases_ = 0;
  }
  last_ = loss;
  return increases_ >= patience_;
}

bool should_stop(const std::vector<double>& losses, std::size_t patience) {
  EarlyStopMonitor monitor(patience);
  for (double l : losses) {
    if (monitor.observe(l)) return true;
  }
  return false;
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& e : r.trace) {
    const auto& it = e.iteration;
    nlohmann::json row = {{"k", it.k}, {"step_size", it.step_size}, {"accepted", it.accepted}};
    row["objective"] = std::isfinite(it.objective) ? nlohmann::json(it.objective) : nlohmann::json(nullptr);
    row["stopping_metric"] = it.stopping_metric ? nlohmann::json(*it.stopping_metric) : nlohmann::json(nullptr);
    if (e.monitor_loss) row["monitor_loss"] = *e.monitor_loss;
    trace.push_back(std::move(row));
  }
  nlohmann::json j = {
      {"config", to_json(r.config)},
      {"trace", std::move(trace)},
      {"final",
       {{"validation_loss", r.validation_loss},
        {"test_error", r.test_error},
        {"hyperparam_count", r.hyperparam_count},
        {"wall_seconds", r.wall_seconds},
        {"termination", r.termination}}},
      {"test_set_accesses", r.test_set_accesses},
      {"hyperparameters",
       {{"feat", std::vector<double>(r.feat_omega.begin(), r.feat_omega.end())},
        {"reg", std::vector<double>(r.reg_omega.begin(), r.reg_omega.end())}}},
  };
  if (!r.lowest_weight_rows.empty() || !r.highest_weight_rows.empty()) {
    j["data_weights"] = {{"lowest", r.lowest_weight_rows}, {"highest", r.highest_weight_rows}};
  }
  return j;
}

namespace {

struct SourceFiles {
  io::LabeledImages train;
  io::LabeledImages test;
};

SourceFiles load_sources(const std::filesystem::path& dir) {
  const auto train_images = dir / "train-images-idx3-ubyte";
  if (std::filesystem::exists(train_images)) {
    return {io::load_idx(train_images, dir / "train-labels-idx1-ubyte"),
            io::load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte")};
  }
  if (std::filesystem::exists(dir / "train.csv")) {
    return {io::load_csv(dir / "train.csv"), io::load_csv(dir / "test.csv")};
  }
  throw DataError("no IDX or CSV training data in " + dir.string());
}

// Side length of the square images, for the pixel grid graph.
Eigen::Index image_side(Eigen::Index pixels) {
  const auto side = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(pixels))));
  if (side * side != pixels) throw DataError("images are not square: " + std::to_string(pixels) + " pixels");
  return side;
}

}  // namespace

ExperimentData load_data(const ExperimentConfig& cfg) {
  SourceFiles src = load_sources(cfg.data_path);
  if (src.test.images.cols() != src.train.images.cols()) throw DataError("train and test image sizes differ");
  const io::SplitSizes sizes = cfg.sizes();
  const io::SplitIndices idx = io::split(static_cast<std::size_t>(src.train.rows()), sizes, cfg.seed);

  ExperimentData data;
  data.train = io::take(src.train, idx.train);
  data.val = io::take(src.train, idx.val);
  data.train_rows = idx.train;
  if (cfg.early_stopping) {
    // Rows after the pool never enter train or validation.
    std::vector<std::size_t> rest(static_cast<std::size_t>(src.train.rows()) - sizes.pool);
    std::iota(rest.begin(), rest.end(), sizes.pool);
    if (rest.empty()) throw InsufficientData("early stopping needs training-file rows beyond the pool");
    data.monitor = io::to_dataset(io::take(src.train, rest));
  }
  data.test = io::to_dataset(src.test);
  return data;
}

LadderModel build_model(Model model, const io::LabeledImages& train, const io::LabeledImages& val,
                        std::size_t k_per_class, std::uint64_t seed) {
  const Eigen::Index pixels = train.images.cols();
  LadderModel out;
  fit::FitProblem& p = out.problem;
  p.train = io::to_dataset(train);
  p.val = io::to_dataset(val);
  p.penalty = fit::Penalty::cross_entropy();

  if (model == Model::ls || model == Model::ls_reg2) {
    p.featurizer = std::make_shared<feat::Identity>(pixels);
    p.reg_terms.push_back({DenseMatrix::Identity(pixels, pixels), "ridge"});
    if (model == Model::ls) {
      p.tune_reg_weights = false;
    } else {
      const Eigen::Index side = image_side(pixels);
      p.reg_terms.push_back({feat::grid_incidence(side, side), "graph"});
    }
    out.omega0 = fit::layout(p);
    if (model == Model::ls_reg2) {
      Vector w = out.omega0.values();
      w.setConstant(-2.0);
      out.omega0 = out.omega0.with_values(w);
    }
    out.regularizer = std::make_shared<prox::Zero>();
    return out;
  }

  const Eigen::Index side = image_side(pixels);
  feat::ArchetypeSet arch = feat::build_archetypes(train.images, train.labels, io::kClasses, k_per_class, seed);
  const Eigen::Index km = arch.centers.rows();
  p.featurizer = std::make_shared<feat::Concat>(std::vector<feat::FeaturizerPtr>{
      std::make_shared<feat::Identity>(pixels), std::make_shared<feat::ArchetypeSoftmax>(std::move(arch)),
      std::make_shared<feat::Constant>(pixels)});
  const Eigen::Index n = pixels + km + 1;

  DenseMatrix r1 = DenseMatrix::Zero(pixels, n);
  r1.leftCols(pixels).setIdentity();
  DenseMatrix r2 = DenseMatrix::Zero(km, n);
  r2.middleCols(pixels, km).setIdentity();
  const DenseMatrix graph = feat::grid_incidence(side, side);
  DenseMatrix r3 = DenseMatrix::Zero(graph.rows(), n);
  r3.leftCols(pixels) = graph;
  p.reg_terms = {{std::move(r1), "pixel_ridge"}, {std::move(r2), "archetype_ridge"}, {std::move(r3), "graph"}};
  p.tune_data_weights = model == Model::ls_reg3_feat_weight;

  out.omega0 = fit::layout(p);
  Vector w = out.omega0.values();
  w[out.omega0.find("feat")->offset] = 3.0;
  out.omega0 = out.omega0.with_values(w);

  if (p.tune_data_weights) {
    auto sep = std::make_shared<prox::Separable>(out.omega0);
    sep->set("data", std::make_shared<prox::ZeroSumSquares>(0.01));
    out.regularizer = std::move(sep);
  } else {
    out.regularizer = std::make_shared<prox::Zero>();
  }
  return out;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, load_data(cfg));
}

RunReport run_experiment(const ExperimentConfig& cfg, ExperimentData data) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  HeldOutSet test(std::move(data.test));

  LadderModel lm = build_model(cfg.model, data.train, data.val, cfg.k_per_class, cfg.seed);
  const fit::FitProblem& p = lm.problem;

  RunReport report;
  report.config = cfg;
  report.hyperparam_count = lm.omega0.size();

  HyperVector omega = lm.omega0;
  if (omega.size() == 0) {
    report.termination = "none";
  } else {
    const tuner::Objective objective = [&p](const HyperVector& w) {
      fit::FitEvaluation ev = fit::objective_and_gradient(p, w);
      return tuner::ObjectiveValue{ev.psi, std::move(ev.gradient)};
    };
    std::map<std::size_t, double> monitor_losses;
    std::optional<EarlyStopMonitor> monitor;
    tuner::AcceptHook hook;
    if (data.monitor) {
      monitor.emplace(cfg.patience);
      const Vector feat0 = omega.segment("feat");
      monitor->observe(fit::mean_loss(p.penalty, fit::fit_theta(p, omega), *p.featurizer, feat0, *data.monitor));
      hook = [&](const HyperVector& w, const tuner::TunerIteration& it) {
        const double loss = fit::mean_loss(p.penalty, fit::fit_theta(p, w), *p.featurizer, w.segment("feat"),
                                           *data.monitor);
        monitor_losses[it.k] = loss;
        return monitor->observe(loss);
      };
    }
    const tuner::TunerReport tr = tuner::run(objective, *lm.regularizer, omega, cfg.tuner, hook);
    for (const auto& it : tr.iterations) {
      TraceEntry e{it, std::nullopt};
      if (const auto found = monitor_losses.find(it.k); found != monitor_losses.end()) e.monitor_loss = found->second;
      report.trace.push_back(e);
    }
    report.termination = tuner::to_string(tr.termination);
    omega = tr.final_omega;
  }

  const DenseMatrix theta = fit::fit_theta(p, omega);
  const Vector feat = omega.segment("feat");
  report.validation_loss = fit::mean_loss(p.penalty, theta, *p.featurizer, feat, p.val);
  report.test_error = fit::test_error(theta, *p.featurizer, feat, test.access());
  report.test_set_accesses = test.accesses();
  report.feat_omega = feat;
  report.reg_omega = omega.segment("reg");

  if (p.tune_data_weights) {
    const Vector w = omega.segment("data");
    std::vector<std::size_t> order(static_cast<std::size_t>(w.size()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&w](std::size_t a, std::size_t b) { return w[static_cast<Eigen::Index>(a)] < w[static_cast<Eigen::Index>(b)]; });
    const std::size_t shown = std::min<std::size_t>(6, order.size());
    for (std::size_t i = 0; i < shown; ++i) {
      report.lowest_weight_rows.push_back(data.train_rows[order[i]]);
      report.highest_weight_rows.push_back(data.train_rows[order[order.size() - 1 - i]]);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!cfg.output_path.empty()) {
    std::ofstream out(cfg.output_path);
    if (!out) throw ConfigError("cannot write report to " + cfg.output_path.string());
    out << to_json(report).dump(2) << '\n';
  }
  return report;
}

}  // namespace lsat::experiment
