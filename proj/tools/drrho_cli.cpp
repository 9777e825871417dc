#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "drrho/data.hpp"
#include "drrho/encoder.hpp"
#include "drrho/error.hpp"
#include "drrho/experiments.hpp"
#include "drrho/kernels.hpp"
#include "drrho/report.hpp"
#include "drrho/trainer.hpp"

namespace fs = std::filesystem;
using namespace drrho;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Method method_or_usage(const std::string& name) {
  try {
    return parse_method(name);
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

// Trainer flags override a base config only when given on the command line.
struct TrainerFlags {
  std::vector<std::function<void(TrainerConfig&)>> apply;
  std::string config_path;
  std::string tau_mode;

  template <class T>
  void add(CLI::App* app, const std::string& name, T TrainerConfig::*field, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, help);
    apply.push_back([opt, value, field](TrainerConfig& c) {
      if (opt->count() > 0) c.*field = *value;
    });
  }

  template <class T>
  void add_adamw(CLI::App* app, const std::string& name, T AdamWConfig::*field, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app->add_option(name, *value, help);
    apply.push_back([opt, value, field](TrainerConfig& c) {
      if (opt->count() > 0) c.adamw.*field = *value;
    });
  }

  void attach(CLI::App* app, bool with_method) {
    app->add_option("--config", config_path, "JSON trainer config (or a report carrying one)");
    if (with_method) {
      auto method = std::make_shared<std::string>();
      auto* opt = app->add_option("--method", *method, "openclip | fastclip | drrho-clip | jest | jest-topk");
      apply.push_back([opt, method](TrainerConfig& c) {
        if (opt->count() > 0) c.method = method_or_usage(*method);
      });
    }
    add(app, "--embed-dim", &TrainerConfig::embed_dim, "embedding dimension");
    add(app, "--batch-size", &TrainerConfig::batch_size, "mini-batch size");
    add(app, "--iterations,-T", &TrainerConfig::iterations, "training iterations");
    add(app, "--lr", &TrainerConfig::lr, "learning rate");
    add(app, "--warmup", &TrainerConfig::warmup_steps, "warmup steps");
    add_adamw(app, "--weight-decay", &AdamWConfig::weight_decay, "decoupled weight decay");
    add_adamw(app, "--beta1", &AdamWConfig::beta1, "first moment decay");
    add_adamw(app, "--beta2", &AdamWConfig::beta2, "second moment decay");
    add(app, "--seed", &TrainerConfig::seed, "training seed");
    add(app, "--data-fraction", &TrainerConfig::data_fraction, "share of the training split");
    app->add_option("--tau-mode", tau_mode, "fixed | learnable");
    add(app, "--tau", &TrainerConfig::tau, "fixed temperature");
    add(app, "--tau-init", &TrainerConfig::tau_init, "initial learnable temperature");
    add(app, "--tau-min", &TrainerConfig::tau_min, "temperature floor");
    add(app, "--rho", &TrainerConfig::rho, "temperature penalty");
    add(app, "--gamma", &TrainerConfig::gamma, "estimator inner rate");
    add(app, "--epsilon", &TrainerConfig::epsilon, "estimator floor");
    auto distill = std::make_shared<bool>(false);
    auto* dopt = app->add_flag("--distill", *distill, "mix in distillation from the reference");
    apply.push_back([dopt, distill](TrainerConfig& c) {
      if (dopt->count() > 0) c.distill = *distill;
    });
    add(app, "--lambda", &TrainerConfig::lambda, "distillation weight");
    add(app, "--tau-ref", &TrainerConfig::tau_ref, "teacher temperature");
    add(app, "--ratio", &TrainerConfig::selection_ratio, "JEST selection ratio");
    add(app, "--n-chunks", &TrainerConfig::n_chunks, "JEST chunks");
    add(app, "--jest-temperature", &TrainerConfig::jest_temperature, "JEST sampling temperature");
    add(app, "--eval-every", &TrainerConfig::eval_every, "evaluation interval");
    add(app, "--objective-rows", &TrainerConfig::objective_rows, "rows for the recorded objective");
  }

  TrainerConfig build() const {
    TrainerConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("config: cannot open " + config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
      c = TrainerConfig::from_json(j.contains("config") ? j.at("config") : j);
    }
    for (const auto& f : apply) f(c);
    if (tau_mode == "fixed") c.tau_learnable = false;
    else if (tau_mode == "learnable") c.tau_learnable = true;
    else if (!tau_mode.empty()) throw ConfigError("tau-mode: expected fixed or learnable");
    return c;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

template <class T>
std::vector<T> parse_numbers(const std::string& s, const char* field) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw ConfigError(std::string(field) + ": cannot parse '" + item + "'");
    }
  }
  return out;
}

std::vector<ScalingPoint> read_points(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("points: cannot open " + path.string());
  std::vector<ScalingPoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_list(line);
    if (cells.size() < 2) throw ConfigError("points: expected 'compute,error' rows");
    try {
      points.push_back({std::stod(cells[0]), std::stod(cells[1])});
    } catch (const std::logic_error&) {
      if (points.empty()) continue;  // header
      throw ConfigError("points: cannot parse '" + line + "'");
    }
  }
  return points;
}

void write_model_report(const ExperimentReport& r, const fs::path& out, const std::string& stem) {
  r.write(out, stem);
  std::cout << (out / (stem + ".json")).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();

  CLI::App app{"DRRho risk minimization and contrastive training at desk scale"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string output = "out";
  app.add_option("--output,-o", output, "output directory")->capture_default_str();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic paired dataset");
  SyntheticParams gp{6000, 32, 32, 16, 0.5, 1.0 / 6.0, 0};
  std::string gen_name = "dataset";
  gen->add_option("--n", gp.n, "pair count")->capture_default_str();
  gen->add_option("--dx", gp.d_x, "first modality dimension")->capture_default_str();
  gen->add_option("--dy", gp.d_y, "second modality dimension")->capture_default_str();
  gen->add_option("--d-latent", gp.d_latent, "latent dimension")->capture_default_str();
  gen->add_option("--sigma", gp.noise_sigma, "observation noise")->capture_default_str();
  gen->add_option("--test-fraction", gp.test_fraction, "test split share")->capture_default_str();
  gen->add_option("--seed", gp.seed, "generator seed")->capture_default_str();
  gen->add_option("--name", gen_name, "output file stem")->capture_default_str();

  // ref-embed
  auto* ref = app.add_subcommand("ref-embed", "train or load a reference model and cache its embeddings");
  std::string ref_data, ref_model, ref_name = "reference";
  ref->add_option("--data", ref_data, "dataset file")->required();
  ref->add_option("--model", ref_model, "existing reference model; trained when absent");
  ref->add_option("--name", ref_name, "output file stem")->capture_default_str();
  TrainerFlags ref_flags;
  ref_flags.attach(ref, true);

  // train
  auto* tr = app.add_subcommand("train", "train a target model");
  std::string tr_data, tr_ref, tr_name = "train";
  bool tr_checkpoint = false;
  tr->add_option("--data", tr_data, "dataset file")->required();
  tr->add_option("--ref", tr_ref, "reference embedding cache");
  tr->add_option("--name", tr_name, "output file stem")->capture_default_str();
  tr->add_flag("--checkpoint", tr_checkpoint, "also write the final trainer state");
  TrainerFlags tr_flags;
  tr_flags.attach(tr, true);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a model on a dataset");
  std::string ev_data, ev_model, ev_ref, ev_name = "eval";
  double ev_fraction = 1.0;
  std::size_t ev_rows = 1024;
  ev->add_option("--data", ev_data, "dataset file")->required();
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--ref", ev_ref, "reference cache; objective is DRRho when given");
  ev->add_option("--data-fraction", ev_fraction, "training share used for the objective")->capture_default_str();
  ev->add_option("--objective-rows", ev_rows, "rows for the objective, 0 for all")->capture_default_str();
  ev->add_option("--name", ev_name, "output file stem")->capture_default_str();

  // variance
  auto* var = app.add_subcommand("variance", "per-anchor loss variance of a trained model");
  std::string var_data, var_model, var_ref, var_name = "variance";
  std::size_t var_rows = 1000;
  var->add_option("--data", var_data, "dataset file")->required();
  var->add_option("--model", var_model, "model file")->required();
  var->add_option("--ref", var_ref, "reference cache; RHO loss when given");
  var->add_option("--rows", var_rows, "training rows to measure on")->capture_default_str();
  var->add_option("--name", var_name, "output file stem")->capture_default_str();

  // sweep
  auto* sw = app.add_subcommand("sweep", "data-efficiency or scaling sweep");
  std::string sw_data, sw_ref, sw_kind = "data", sw_methods = "fastclip,drrho-clip", sw_fractions = "1,0.75,0.5";
  std::string sw_dims = "4,8,16", sw_budgets = "250,500,1000", sw_name = "sweep";
  double sw_share = 1.0;
  sw->add_option("--data", sw_data, "dataset file")->required();
  sw->add_option("--ref", sw_ref, "reference cache");
  sw->add_option("--kind", sw_kind, "data | scaling")->capture_default_str();
  sw->add_option("--methods", sw_methods, "comma-separated methods")->capture_default_str();
  sw->add_option("--fractions", sw_fractions, "comma-separated fractions")->capture_default_str();
  sw->add_option("--share", sw_share, "pool share that a 100% fraction covers")->capture_default_str();
  sw->add_option("--dims", sw_dims, "scaling: embedding dimensions")->capture_default_str();
  sw->add_option("--budgets", sw_budgets, "scaling: iteration budgets")->capture_default_str();
  sw->add_option("--name", sw_name, "output file stem")->capture_default_str();
  TrainerFlags sw_flags;
  sw_flags.attach(sw, false);

  // scaling-fit
  auto* sf = app.add_subcommand("scaling-fit", "fit E = alpha * C^beta to (compute, error) rows");
  std::string sf_points, sf_name = "scaling_fit";
  sf->add_option("points", sf_points, "CSV of compute,error")->required();
  sf->add_option("--name", sf_name, "output file stem")->capture_default_str();

  // plot-data
  auto* pd = app.add_subcommand("plot-data", "write (x, y) columns from a report");
  std::string pd_report, pd_x, pd_y, pd_name = "plot";
  std::vector<std::string> pd_metrics;
  pd->add_option("--report", pd_report, "report JSON")->required();
  pd->add_option("--metric", pd_metrics, "series metrics to emit against step");
  pd->add_option("--x", pd_x, "table column for x");
  pd->add_option("--y", pd_y, "table column for y");
  pd->add_option("--name", pd_name, "output file stem")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const fs::path out(output);
  try {
    if (*gen) {
      const auto data = generate_synthetic(gp);
      fs::create_directories(out);
      save_dataset(data, out / (gen_name + ".dpd"));
      std::cout << (out / (gen_name + ".dpd")).string() << " checksum " << data.checksum() << "\n";
    } else if (*ref) {
      const auto data = load_dataset(ref_data);
      TwoTowerModel model;
      fs::create_directories(out);
      if (!ref_model.empty()) {
        model = load_model(ref_model);
      } else {
        TrainerConfig c = ref_flags.build();
        if (!ref->get_option("--method")->count()) c.method = Method::fastclip;
        if (uses_reference(c.method) || c.distill) throw ConfigError("method: a reference must be trained without a reference");
        auto run = train(c, data, nullptr);
        model = run.state.model;
        save_model(model, out / (ref_name + ".model"));
        write_model_report(run.report, out, ref_name);
      }
      const auto cache = build_reference_cache(data, model);
      save_cache(cache, out / (ref_name + ".emb"));
      std::cout << (out / (ref_name + ".emb")).string() << " source " << cache.source_id << "\n";
    } else if (*tr) {
      const TrainerConfig c = tr_flags.build();
      const auto data = load_dataset(tr_data);
      EmbeddingCache cache;
      if (!tr_ref.empty()) cache = load_cache(tr_ref);
      auto run = train(c, data, tr_ref.empty() ? nullptr : &cache);
      fs::create_directories(out);
      save_model(run.state.model, out / (tr_name + ".model"));
      if (tr_checkpoint) save_checkpoint(run.state, out / (tr_name + ".ckpt"));
      write_model_report(run.report, out, tr_name);
    } else if (*ev) {
      const auto data = load_dataset(ev_data);
      const auto model = load_model(ev_model);
      EmbeddingCache cache;
      if (!ev_ref.empty()) cache = load_cache(ev_ref);
      auto rows = data.train_subset(ev_fraction);
      if (ev_rows > 0 && rows.size() > ev_rows) rows.resize(ev_rows);
      ExperimentReport r;
      r.config = {{"data", ev_data}, {"model", ev_model}, {"ref", ev_ref}, {"data_fraction", ev_fraction},
                  {"objective_rows", ev_rows}};
      r.provenance = {{"dataset_checksum", data.checksum()}, {"model_id_hash", model.id_hash()},
                      {"code_version", kCodeVersion}};
      r.record(0, "objective", exact_objective(model, data, ev_ref.empty() ? nullptr : &cache, rows));
      const auto test = data.test_indices();
      if (!test.empty())
        r.record(0, "test_recall_at_1",
                 recall_at_1(similarity_batch(model, gather_rows(data.xs, test), gather_rows(data.ys, test))));
      r.record(0, "tau", model.tau);
      fs::create_directories(out);
      write_model_report(r, out, ev_name);
    } else if (*var) {
      const auto data = load_dataset(var_data);
      const auto model = load_model(var_model);
      auto rows = data.train_indices();
      if (var_rows > 0 && rows.size() > var_rows) rows.resize(var_rows);
      const auto s = similarity_batch(model, gather_rows(data.xs, rows), gather_rows(data.ys, rows));
      LossVarianceResult v;
      ExperimentReport r;
      r.config = {{"data", var_data}, {"model", var_model}, {"ref", var_ref}, {"rows", rows.size()}};
      r.provenance = {{"dataset_checksum", data.checksum()}, {"model_id_hash", model.id_hash()},
                      {"code_version", kCodeVersion}};
      if (var_ref.empty()) {
        v = loss_variance(s, nullptr);
      } else {
        const auto cache = load_cache(var_ref);
        if (cache.size() != data.size()) throw ConfigError("ref: cache length does not match the dataset");
        const auto rs = cached_similarity(cache, rows);
        v = loss_variance(s, &rs);
        r.provenance["cache_source_id"] = cache.source_id;
      }
      r.record(0, "image_variance_mean", v.image.mean);
      r.record(0, "image_variance_std", v.image.std);
      r.record(0, "text_variance_mean", v.text.mean);
      r.record(0, "text_variance_std", v.text.std);
      fs::create_directories(out);
      write_model_report(r, out, var_name);
    } else if (*sw) {
      const TrainerConfig base = sw_flags.build();
      const auto data = load_dataset(sw_data);
      EmbeddingCache cache;
      if (!sw_ref.empty()) cache = load_cache(sw_ref);
      const EmbeddingCache* cp = sw_ref.empty() ? nullptr : &cache;
      std::vector<Method> methods;
      for (const auto& m : split_list(sw_methods)) methods.push_back(method_or_usage(m));
      const auto fractions = parse_numbers<double>(sw_fractions, "fractions");
      ExperimentReport r;
      if (sw_kind == "data") {
        r = data_efficiency_sweep(base, methods, fractions, data, cp, sw_share);
      } else if (sw_kind == "scaling") {
        ScalingSweepConfig sc{parse_numbers<std::size_t>(sw_dims, "dims"),
                              parse_numbers<std::size_t>(sw_budgets, "budgets"), fractions, sw_share};
        r = scaling_sweep(base, methods, sc, data, cp).report;
      } else {
        throw ConfigError("kind: expected data or scaling");
      }
      fs::create_directories(out);
      write_model_report(r, out, sw_name);
    } else if (*sf) {
      const auto points = read_points(sf_points);
      const auto fit = fit_scaling_law(points);
      std::cout << "alpha " << format_double(fit.alpha) << "\nbeta " << format_double(fit.beta) << "\nresidual "
                << format_double(fit.residual) << "\n";
      ExperimentReport r;
      r.config = {{"points", sf_points}, {"count", points.size()}};
      r.provenance = {{"code_version", kCodeVersion}};
      r.record(0, "alpha", fit.alpha);
      r.record(0, "beta", fit.beta);
      r.record(0, "residual", fit.residual);
      fs::create_directories(out);
      r.write(out, sf_name);
    } else if (*pd) {
      std::ifstream in(pd_report);
      if (!in) throw ConfigError("report: cannot open " + pd_report);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
      }
      fs::create_directories(out);
      const auto emit = [&](const std::string& stem, const std::string& xn, const std::vector<double>& xs,
                            const std::string& yn, const std::vector<double>& ys) {
        const auto path = out / (stem + ".csv");
        std::ofstream f(path);
        f << plot_columns_csv(xn, xs, yn, ys);
        std::cout << path.string() << "\n";
      };
      for (const auto& metric : pd_metrics) {
        std::vector<double> xs, ys;
        std::ifstream csv(fs::path(pd_report).replace_extension(".csv"));
        if (!csv) throw ConfigError("report: series CSV next to " + pd_report + " is missing");
        std::string line;
        std::getline(csv, line);
        while (std::getline(csv, line)) {
          const auto cells = split_list(line);
          if (cells.size() != 3) throw ConfigError("report: malformed series row '" + line + "'");
          if (cells[1] != metric) continue;
          xs.push_back(std::stod(cells[0]));
          ys.push_back(std::stod(cells[2]));
        }
        if (xs.empty()) throw ConfigError("metric: no series named " + metric);
        emit(pd_name + "_" + metric, "step", xs, metric, ys);
      }
      if (!pd_x.empty() || !pd_y.empty()) {
        if (pd_x.empty() || pd_y.empty()) throw ConfigError("x: --x and --y go together");
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
        for (const auto& row : j.value("table", nlohmann::json::array())) {
          if (!row.contains(pd_x) || !row.contains(pd_y)) throw ConfigError("x: table lacks the requested columns");
          auto& g = groups[row.value("method", std::string("all"))];
          g.first.push_back(row.at(pd_x).get<double>());
          g.second.push_back(row.at(pd_y).get<double>());
        }
        for (const auto& [name, g] : groups) emit(pd_name + "_" + name, pd_x, g.first, pd_y, g.second);
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
