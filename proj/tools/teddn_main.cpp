#include "teddn/checkpoint.hpp"
#include "teddn/config.hpp"
#include "teddn/data.hpp"
#include "teddn/error.hpp"
#include "teddn/gc_module.hpp"
#include "teddn/gradcheck.hpp"
#include "teddn/metrics.hpp"
#include "teddn/model.hpp"
#include "teddn/ops.hpp"
#include "teddn/rng.hpp"
#include "teddn/schedules.hpp"
#include "teddn/tape.hpp"
#include "teddn/training.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace teddn;

struct Experiment {
    ExperimentConfig cfg;    // reconciled, pre-variant
    ModelConfig model;       // variant applied
    DataBundle data;
    std::string out_dir;     // resolved
};

Experiment load_experiment(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
    Experiment exp;
    exp.cfg = load_experiment_config(config_path, overrides);
    TrafficSeries series = load_dataset(exp.cfg.dataset);
    reconcile_model_with_series(exp.cfg.model, series);
    exp.cfg.model.validate();
    exp.cfg.train.validate();
    exp.model = variant(exp.cfg.model, exp.cfg.variant);
    exp.data = prepare_data(std::move(series), exp.model.t_h, exp.model.t_out);
    exp.out_dir = resolve_output_dir(exp.cfg.output_dir);
    return exp;
}

void echo_config(const Experiment& exp) {
    std::filesystem::create_directories(exp.out_dir);
    const std::string path = (std::filesystem::path(exp.out_dir) / "config.json").string();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out << experiment_config_to_json(exp.cfg);
}

void print_report(const MetricReport& report) {
    std::cout << metrics_to_csv(report);
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
    Experiment exp = load_experiment(config_path, overrides);
    echo_config(exp);
    TeddnModel model = TeddnModel::build(exp.model, exp.cfg.train.seed);
    FitResult result = fit(model, exp.data, exp.cfg.train, exp.out_dir);
    std::cout << "trained " << result.log.size() << " epochs; best epoch " << result.best_epoch
              << " val MAE " << result.best_val_mae << "\n";
    std::cout << "test metrics:\n";
    print_report(result.test);
    std::cout << "outputs in " << exp.out_dir << "\n";
    return 0;
}

int run_evaluate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& checkpoint_path, const std::string& adjacency_prefix) {
    Experiment exp = load_experiment(config_path, overrides);
    TeddnModel model = TeddnModel::build(exp.model, 0);
    load_checkpoint_into(model, checkpoint_path);

    MetricReport report = evaluate_model(model, exp.data, exp.data.splits.test, exp.cfg.train);
    print_report(report);

    std::filesystem::create_directories(exp.out_dir);
    const std::filesystem::path dir(exp.out_dir);
    {
        std::ofstream csv(dir / "eval_metrics.csv", std::ios::trunc);
        csv << metrics_to_csv(report);
        std::ofstream js(dir / "eval_metrics.json", std::ios::trunc);
        js << metrics_to_json(report);
    }
    if (!adjacency_prefix.empty()) {
        for (long s = 0; s < exp.model.streams(); ++s) {
            gc::export_adjacency_csv(model.adjacency(s),
                                     adjacency_prefix + "_stream" + std::to_string(s) + ".csv");
        }
    }
    return 0;
}

int run_predict(const std::string& config_path, const std::vector<std::string>& overrides,
                const std::string& checkpoint_path, long window, const std::string& out_path) {
    Experiment exp = load_experiment(config_path, overrides);
    TeddnModel model = TeddnModel::build(exp.model, 0);
    load_checkpoint_into(model, checkpoint_path);

    const std::vector<long> windows =
        make_windows(exp.data.splits.test, exp.model.t_h, exp.model.t_out);
    if (window < 0 || window >= static_cast<long>(windows.size())) {
        throw ConfigError("window index " + std::to_string(window) + " out of range [0, "
                          + std::to_string(windows.size()) + ")");
    }
    WindowBatch batch = gather_batch(exp.data.series, exp.data.stats,
                                     {windows[static_cast<size_t>(window)]}, exp.model.t_h,
                                     exp.model.t_out);
    Tensor pred = invert_norm(model.forward(batch.inputs, batch.tod, batch.dow, nullptr),
                              exp.data.stats);

    std::ostringstream csv;
    csv.precision(10);
    csv << "horizon,node,channel,value\n";
    const long n = exp.model.nodes;
    const long c = exp.model.channels;
    const real* v = pred.data();
    for (long h = 0; h < exp.model.t_out; ++h) {
        for (long node = 0; node < n; ++node) {
            for (long ch = 0; ch < c; ++ch) {
                csv << (h + 1) << ',' << node << ',' << ch << ',' << v[(h * n + node) * c + ch]
                    << '\n';
            }
        }
    }
    if (out_path.empty() || out_path == "-") {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw FormatError("cannot write " + out_path);
        out << csv.str();
    }
    return 0;
}

int run_ablate(const std::string& config_path, const std::vector<std::string>& overrides) {
    Experiment exp = load_experiment(config_path, overrides);
    echo_config(exp);
    std::vector<AblationRow> rows = ablation_suite(exp.cfg.model, exp.data, exp.cfg.train,
                                                   exp.out_dir);
    std::cout << ablation_to_csv(rows, exp.cfg.model.t_out);
    std::cout << "outputs in " << exp.out_dir << "\n";
    return 0;
}

int run_baseline(const std::string& config_path, const std::vector<std::string>& overrides) {
    Experiment exp = load_experiment(config_path, overrides);
    const MetricReport persistence = persistence_baseline(
        exp.data, exp.model.t_h, exp.model.t_out, exp.cfg.train.mape_threshold);
    const MetricReport historical = historical_average_baseline(
        exp.data, exp.model.t_h, exp.model.t_out, exp.cfg.train.mape_threshold);

    std::cout << "persistence:\n" << metrics_to_csv(persistence);
    std::cout << "historical_average:\n" << metrics_to_csv(historical);

    std::filesystem::create_directories(exp.out_dir);
    const std::filesystem::path dir(exp.out_dir);
    std::ofstream p(dir / "baseline_persistence.csv", std::ios::trunc);
    p << metrics_to_csv(persistence);
    std::ofstream h(dir / "baseline_historical_average.csv", std::ios::trunc);
    h << metrics_to_csv(historical);
    return 0;
}

int run_convert(const std::string& in_path, const std::string& out_dir, long steps_per_day,
                int start_weekday) {
    ConvertResult result = convert_archive(in_path, out_dir, steps_per_day, start_weekday);
    std::cout << "converted (" << result.steps << ", " << result.nodes << ", " << result.channels
              << ") -> " << result.payload_path << "\n";
    return 0;
}

ModelConfig gradcheck_config(const std::string& size) {
    ModelConfig mc;
    if (size == "tiny") {
        mc.nodes = 3;
        mc.channels = 1;
        mc.t_h = 2;
        mc.t_out = 2;
        mc.d_t = 2;
        mc.d_n = 2;
        mc.d_g = 2;
        mc.d_h = 2;
        mc.hops = 2;
        mc.reduction_ratio = 2;
        mc.steps_per_day = 8;
        mc.start_weekday = 3;
    } else if (size == "small") {
        mc.nodes = 4;
        mc.channels = 2;
        mc.t_h = 3;
        mc.t_out = 3;
        mc.d_t = 4;
        mc.d_n = 4;
        mc.d_g = 4;
        mc.d_h = 4;
        mc.hops = 2;
        mc.reduction_ratio = 2;
        mc.steps_per_day = 12;
        mc.start_weekday = 1;
    } else {
        throw ConfigError("gradcheck size must be 'tiny' or 'small', got '" + size + "'");
    }
    return mc;
}

std::string module_bucket(const std::string& name) {
    if (name.find(".cwam.") != std::string::npos) return "cwam";
    if (name.rfind("gate.", 0) == 0) return "disentangle_gate";
    if (name.rfind("time.", 0) == 0 || name.rfind("embed.", 0) == 0) return "embeddings";
    if (name.find(".te.") != std::string::npos) return "te_module";
    if (name.find(".gru.") != std::string::npos || name.find(".tmap.") != std::string::npos) {
        return "temporal_backbone";
    }
    if (name.find("graph") != std::string::npos || name.find(".fuse") != std::string::npos) {
        return "gc_module";
    }
    if (name.rfind("head.", 0) == 0) return "output_head";
    return "other";
}

int run_gradcheck(const std::string& size, std::uint64_t seed, bool break_adjoint) {
    if (break_adjoint) ops::set_adjoint_fault_for_testing(true);

    const ModelConfig mc = gradcheck_config(size);
    TeddnModel model = TeddnModel::build(mc, seed);
    Rng rng(seed ^ 0x5eedULL);

    const long b = size == "tiny" ? 1 : 2;
    Tensor inputs = Tensor::zeros({b, mc.t_h, mc.nodes, mc.channels});
    for (long i = 0; i < inputs.size(); ++i) inputs.data()[i] = static_cast<real>(rng.uniform(0.2, 1.8));
    Tensor targets = Tensor::zeros({b, mc.t_out, mc.nodes, mc.channels});
    for (long i = 0; i < targets.size(); ++i) targets.data()[i] = static_cast<real>(rng.uniform(0.2, 1.8));
    std::vector<long> tod, dow;
    for (long i = 0; i < b * mc.t_h; ++i) {
        tod.push_back(rng.index(mc.steps_per_day));
        dow.push_back(rng.index(7));
    }
    NormStats stats;
    for (long ch = 0; ch < mc.channels; ++ch) {
        stats.mean.push_back(static_cast<real>(0.4 + 0.1 * static_cast<double>(ch)));
        stats.stdev.push_back(static_cast<real>(1.3));
    }

    auto loss_value = [&]() -> real {
        Tensor pred = model.forward(inputs, tod, dow, nullptr);
        return horizon_loss(invert_norm(pred, stats), targets, mc.t_out, mc.t_out).item();
    };

    auto params = model.parameters();
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Tensor pred = model.forward(inputs, tod, dow, &tape);
        Tensor loss = horizon_loss(invert_norm(pred, stats), targets, mc.t_out, mc.t_out);
        tape.backward(loss);
    }

    std::map<std::string, real> worst;
    std::string failed_name;
    real failed_err = 0;
    for (Parameter* p : params) {
        Tensor original = p->value;
        auto f = [&](const Tensor& v) -> real {
            p->value = v;
            const real out = loss_value();
            p->value = original;
            return out;
        };
        Tensor fd = finite_difference_grad(f, original);
        const real err = relative_error(p->grad, fd);
        const std::string bucket = module_bucket(p->name);
        if (err > worst[bucket]) worst[bucket] = err;
        if (err >= kGradCheckTolerance && failed_name.empty()) {
            failed_name = p->name;
            failed_err = err;
        }
    }

    for (const auto& [bucket, err] : worst) {
        std::cout << "module " << bucket << " worst relative error " << err << "\n";
    }
    if (!failed_name.empty()) {
        std::cout << "gradcheck failed: parameter " << failed_name << " relative error "
                  << failed_err << "\n";
        return 5;
    }
    std::cout << "gradcheck passed (" << size << ", seed " << seed << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TEDDN traffic-flow forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint_path;
    std::string adjacency_prefix;
    std::string predict_out;
    long predict_window = 0;
    std::string convert_in, convert_out;
    long convert_spd = 288;
    int convert_weekday = 0;
    std::string gc_size = "tiny";
    std::uint64_t gc_seed = 0;
    bool gc_break = false;

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--set", overrides, "override, dotted key=value");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    add_config(train_cmd);

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    add_config(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--export-adjacency", adjacency_prefix,
                         "write per-stream adjacency CSVs with this path prefix");

    CLI::App* predict_cmd = app.add_subcommand("predict", "forecast one test window");
    add_config(predict_cmd);
    predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    predict_cmd->add_option("--window", predict_window, "test window index");
    predict_cmd->add_option("--out", predict_out, "output CSV ('-' for stdout)");

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the four-variant ablation");
    add_config(ablate_cmd);

    CLI::App* baseline_cmd = app.add_subcommand("baseline", "persistence and historical-average");
    add_config(baseline_cmd);

    CLI::App* convert_cmd = app.add_subcommand("convert", "ingest an npz/npy archive to flatbin");
    convert_cmd->add_option("--in", convert_in, "archive path")->required();
    convert_cmd->add_option("--out", convert_out, "output directory")->required();
    convert_cmd->add_option("--steps-per-day", convert_spd, "time slots per day");
    convert_cmd->add_option("--start-weekday", convert_weekday, "weekday of the first row (0=Mon)");

    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc_cmd->add_option("--size", gc_size, "tiny or small");
    gc_cmd->add_option("--seed", gc_seed, "rng seed");
    gc_cmd->add_flag("--break-adjoint", gc_break, "inject an adjoint fault (negative control)");

    int rc = 0;
    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) rc = run_train(config_path, overrides);
        else if (eval_cmd->parsed()) rc = run_evaluate(config_path, overrides, checkpoint_path, adjacency_prefix);
        else if (predict_cmd->parsed()) rc = run_predict(config_path, overrides, checkpoint_path, predict_window, predict_out);
        else if (ablate_cmd->parsed()) rc = run_ablate(config_path, overrides);
        else if (baseline_cmd->parsed()) rc = run_baseline(config_path, overrides);
        else if (convert_cmd->parsed()) rc = run_convert(convert_in, convert_out, convert_spd, convert_weekday);
        else if (gc_cmd->parsed()) rc = run_gradcheck(gc_size, gc_seed, gc_break);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const BoundsError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 4;
    }
    return rc;
}
