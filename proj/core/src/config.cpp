#include "teddn/config.hpp"

#include "teddn/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace teddn {

namespace {

using nlohmann::json;

std::string joined(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Strict section reader: every key must be consumed exactly once.
class Reader {
public:
    Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) {
            throw ConfigError("config section '" + (prefix_.empty() ? "<root>" : prefix_)
                              + "' must be a JSON object");
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + joined(prefix_, key) + "' has the wrong type");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    json section(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return json::object();
        if (!it->is_object()) {
            throw ConfigError("config key '" + joined(prefix_, key) + "' must be a JSON object");
        }
        return *it;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) {
                throw ConfigError("unknown config key '" + joined(prefix_, item.key()) + "'");
            }
        }
    }

private:
    const json& j_;
    std::string prefix_;
    std::set<std::string> seen_;
};

DatasetConfig dataset_from_json(const json& j) {
    Reader r(j, "dataset");
    DatasetConfig cfg;
    r.get("format", cfg.format);
    r.get("path", cfg.path);
    r.get("csv_paths", cfg.csv_paths);
    r.get("channels", cfg.channels);
    r.get("steps_per_day", cfg.steps_per_day);
    r.get("start_weekday", cfg.start_weekday);
    r.finish();
    return cfg;
}

json dataset_to_json(const DatasetConfig& cfg) {
    return json{{"format", cfg.format},
                {"path", cfg.path},
                {"csv_paths", cfg.csv_paths},
                {"channels", cfg.channels},
                {"steps_per_day", cfg.steps_per_day},
                {"start_weekday", cfg.start_weekday}};
}

// `calendar` distinguishes the experiment-file schema (calendar lives in the
// dataset section) from the checkpoint schema (self-contained).
ModelConfig model_from_json_impl(const json& j, const std::string& prefix, bool calendar,
                                 ModelConfig cfg) {
    Reader r(j, prefix);
    r.get("nodes", cfg.nodes);
    r.get("channels", cfg.channels);
    r.get("t_h", cfg.t_h);
    r.get("t_out", cfg.t_out);
    r.get("d_t", cfg.d_t);
    r.get("d_n", cfg.d_n);
    r.get("d_g", cfg.d_g);
    r.get("d_h", cfg.d_h);
    r.get("hops", cfg.hops);
    double alpha = cfg.alpha, beta_res = cfg.beta_res, epsilon = cfg.epsilon;
    r.get("alpha", alpha);
    r.get("beta_res", beta_res);
    r.get("epsilon", epsilon);
    cfg.alpha = static_cast<real>(alpha);
    cfg.beta_res = static_cast<real>(beta_res);
    cfg.epsilon = static_cast<real>(epsilon);
    r.get("reduction_ratio", cfg.reduction_ratio);
    r.get("te_groups", cfg.te_groups);
    r.get("share_graph_embeddings", cfg.share_graph_embeddings);
    r.get("use_te", cfg.use_te);
    r.get("use_dg", cfg.use_dg);
    r.get("use_gru", cfg.use_gru);
    if (calendar) {
        r.get("steps_per_day", cfg.steps_per_day);
        r.get("start_weekday", cfg.start_weekday);
    }
    r.finish();
    return cfg;
}

json model_to_json_impl(const ModelConfig& cfg, bool calendar) {
    json j{{"nodes", cfg.nodes},
           {"channels", cfg.channels},
           {"t_h", cfg.t_h},
           {"t_out", cfg.t_out},
           {"d_t", cfg.d_t},
           {"d_n", cfg.d_n},
           {"d_g", cfg.d_g},
           {"d_h", cfg.d_h},
           {"hops", cfg.hops},
           {"alpha", static_cast<double>(cfg.alpha)},
           {"beta_res", static_cast<double>(cfg.beta_res)},
           {"epsilon", static_cast<double>(cfg.epsilon)},
           {"reduction_ratio", cfg.reduction_ratio},
           {"te_groups", cfg.te_groups},
           {"share_graph_embeddings", cfg.share_graph_embeddings},
           {"use_te", cfg.use_te},
           {"use_dg", cfg.use_dg},
           {"use_gru", cfg.use_gru}};
    if (calendar) {
        j["steps_per_day"] = cfg.steps_per_day;
        j["start_weekday"] = cfg.start_weekday;
    }
    return j;
}

TrainConfig train_from_json(const json& j) {
    Reader r(j, "train");
    TrainConfig cfg;
    double lr = cfg.lr, wd = cfg.weight_decay, eps = cfg.adam_eps, decay = cfg.lr_decay;
    double floor_v = cfg.lr_floor, mape = cfg.mape_threshold;
    r.get("lr", lr);
    r.get("weight_decay", wd);
    r.get("adam_eps", eps);
    r.get("lr_decay", decay);
    r.get("lr_floor", floor_v);
    r.get("mape_threshold", mape);
    cfg.lr = static_cast<real>(lr);
    cfg.weight_decay = static_cast<real>(wd);
    cfg.adam_eps = static_cast<real>(eps);
    cfg.lr_decay = static_cast<real>(decay);
    cfg.lr_floor = static_cast<real>(floor_v);
    cfg.mape_threshold = static_cast<real>(mape);
    r.get("batch_size", cfg.batch_size);
    r.get("warmup_epochs", cfg.warmup_epochs);
    r.get("curriculum_step", cfg.curriculum_step);
    r.get("max_horizon", cfg.max_horizon);
    r.get("patience", cfg.patience);
    r.get("max_epochs", cfg.max_epochs);
    r.get("seed", cfg.seed);
    r.get("lr_plateau_window", cfg.lr_plateau_window);
    r.finish();
    return cfg;
}

json train_to_json(const TrainConfig& cfg) {
    return json{{"lr", static_cast<double>(cfg.lr)},
                {"weight_decay", static_cast<double>(cfg.weight_decay)},
                {"adam_eps", static_cast<double>(cfg.adam_eps)},
                {"batch_size", cfg.batch_size},
                {"lr_decay", static_cast<double>(cfg.lr_decay)},
                {"warmup_epochs", cfg.warmup_epochs},
                {"curriculum_step", cfg.curriculum_step},
                {"max_horizon", cfg.max_horizon},
                {"patience", cfg.patience},
                {"max_epochs", cfg.max_epochs},
                {"seed", cfg.seed},
                {"lr_plateau_window", cfg.lr_plateau_window},
                {"lr_floor", static_cast<double>(cfg.lr_floor)},
                {"mape_threshold", static_cast<double>(cfg.mape_threshold)}};
}

void apply_override(json& root, const std::string& pair) {
    auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like key=value, got '" + pair + "'");
    }
    const std::string dotted = pair.substr(0, eq);
    const std::string value = pair.substr(eq + 1);

    std::vector<std::string> parts;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty() || std::any_of(parts.begin(), parts.end(),
                                     [](const std::string& p) { return p.empty(); })) {
        throw ConfigError("bad override key '" + dotted + "'");
    }

    json* node = &root;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
        node = &(*node)[parts[i]];
        if (!node->is_object()) {
            throw ConfigError("override key '" + dotted + "' descends into a non-object value");
        }
    }
    json parsed = json::parse(value, nullptr, false);
    (*node)[parts.back()] = parsed.is_discarded() ? json(value) : parsed;
}

} // namespace

void DatasetConfig::validate() const {
    if (format != "csv" && format != "flatbin") {
        throw ConfigError("dataset.format must be 'csv' or 'flatbin', got '" + format + "'");
    }
    if (format == "flatbin" && path.empty()) {
        throw ConfigError("dataset.path is required for flatbin datasets");
    }
    if (format == "csv" && csv_paths.empty()) {
        throw ConfigError("dataset.csv_paths needs at least one channel file");
    }
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::vector<std::string>& overrides) {
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded()) throw ConfigError("config is not valid JSON");
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    for (const std::string& pair : overrides) apply_override(root, pair);

    Reader r(root, "");
    ExperimentConfig cfg;
    cfg.dataset = dataset_from_json(r.section("dataset"));

    ModelConfig base;
    base.nodes = 0;
    base.channels = 0; // derive both from the dataset by default
    base.steps_per_day = cfg.dataset.steps_per_day;
    base.start_weekday = cfg.dataset.start_weekday;
    cfg.model = model_from_json_impl(r.section("model"), "model", false, base);

    cfg.train = train_from_json(r.section("train"));
    r.get("variant", cfg.variant);
    r.get("output_dir", cfg.output_dir);
    r.finish();

    const auto& names = variant_names();
    if (std::find(names.begin(), names.end(), cfg.variant) == names.end()) {
        throw ConfigError("unknown variant '" + cfg.variant + "'");
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str(), overrides);
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    json root{{"dataset", dataset_to_json(cfg.dataset)},
              {"model", model_to_json_impl(cfg.model, false)},
              {"train", train_to_json(cfg.train)},
              {"variant", cfg.variant},
              {"output_dir", cfg.output_dir}};
    return root.dump(2) + "\n";
}

std::string model_config_to_json(const ModelConfig& cfg) {
    return model_to_json_impl(cfg, true).dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("model config is not valid JSON");
    return model_from_json_impl(j, "model", true, ModelConfig{});
}

std::string resolve_output_dir(const std::string& output_dir) {
    if (!output_dir.empty() && output_dir.front() == '/') return output_dir;
    const char* root = std::getenv("TEDDN_OUTPUT_ROOT");
    if (root == nullptr || *root == '\0') return output_dir;
    std::string base(root);
    if (base.back() != '/') base += '/';
    return base + output_dir;
}

TrafficSeries load_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    TrafficSeries series;
    if (cfg.format == "csv") {
        series = load_csv(cfg.csv_paths, cfg.steps_per_day, cfg.start_weekday);
    } else {
        series = load_flatbin(cfg.path);
    }
    return select_channels(series, cfg.channels);
}

void reconcile_model_with_series(ModelConfig& model, const TrafficSeries& series) {
    if (model.nodes == 0) model.nodes = series.nodes();
    if (model.channels == 0) model.channels = series.channels();
    if (model.nodes != series.nodes()) {
        throw ConfigError("model.nodes is " + std::to_string(model.nodes) + " but the dataset has "
                          + std::to_string(series.nodes()) + " nodes");
    }
    if (model.channels != series.channels()) {
        throw ConfigError("model.channels is " + std::to_string(model.channels)
                          + " but the dataset has " + std::to_string(series.channels())
                          + " channels");
    }
    model.steps_per_day = series.steps_per_day;
    model.start_weekday = series.start_weekday;
}

} // namespace teddn
