#include "complearn/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace complearn::cli {

using nlohmann::json;

namespace {

double default_lambda(nn::Aux aux) {
    switch (aux) {
        case nn::Aux::rot: return 0.05;
        case nn::Aux::moco:
        case nn::Aux::densecl: return 0.2;
        case nn::Aux::none: return 0.0;
    }
    return 0.0;
}

int default_crop_offset(nn::Task first_task) {
    // Depth pairs sit closer together than the segmentation/boundary ones,
    // mirroring the relative crop distances used per task.
    return first_task == nn::Task::depth ? 2 : 4;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "name",       "mode",        "modes",        "task",        "tasks",
        "aux",        "auxes",       "lambda",       "lambdas",     "fraction",
        "fractions",  "seed",        "seeds",        "lr",          "momentum",
        "weight_decay", "poly_power", "iters",       "batch",       "tau",
        "ema_momentum", "w_local",   "dense_grid",   "crop",        "crop_offset",
        "train_size", "val_size",    "data_seed",    "image_size",  "classes",
        "noise",      "depth_near",  "depth_far",    "min_shapes",  "max_shapes",
        "eval_every", "eval_shifted", "record_walltime"};
    return keys;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double to_double(const std::string& field, const std::string& s) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field, "not a number: '" + s + "'");
    }
}

int64_t to_int(const std::string& field, const std::string& s) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(field, "not an integer: '" + s + "'");
    }
}

bool to_bool(const std::string& field, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(field, "not a boolean: '" + s + "'");
}

// Normalized view over file + flag inputs: every value ends up as a list of
// strings keyed by field name.
struct RawConfig {
    std::map<std::string, std::vector<std::string>> values;

    bool has(const std::string& k) const { return values.count(k) > 0; }
    const std::vector<std::string>& list(const std::string& k) const { return values.at(k); }
    std::string single(const std::string& k) const {
        const auto& v = values.at(k);
        if (v.size() != 1) throw ConfigError(k, "expected a single value");
        return v[0];
    }
};

std::string json_scalar_to_string(const std::string& field, const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
    if (v.is_number_unsigned()) return std::to_string(v.get<uint64_t>());
    if (v.is_number_float()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    throw ConfigError(field, "unsupported value type");
}

RawConfig normalize(const json& j, const std::map<std::string, std::string>& overrides) {
    RawConfig raw;
    if (!j.is_null()) {
        if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!known_keys().count(it.key())) throw ConfigError(it.key(), "unknown key");
            std::vector<std::string> vals;
            if (it.value().is_array()) {
                for (const auto& v : it.value()) vals.push_back(json_scalar_to_string(it.key(), v));
            } else {
                vals.push_back(json_scalar_to_string(it.key(), it.value()));
            }
            raw.values[it.key()] = std::move(vals);
        }
    }
    for (const auto& [k, v] : overrides) {
        if (!known_keys().count(k)) throw ConfigError(k, "unknown key");
        raw.values[k] = split_csv(v);  // flags override file values
    }
    return raw;
}

}  // namespace

ExperimentSpec parse_config_text(const std::string& json_text,
                                 const std::map<std::string, std::string>& overrides) {
    json j;
    if (!json_text.empty()) {
        try {
            j = json::parse(json_text);
        } catch (const json::parse_error& e) {
            throw ConfigError("<file>", std::string("JSON parse failure: ") + e.what());
        }
    }
    RawConfig raw = normalize(j, overrides);

    ExperimentSpec spec;
    train::TrainConfig& cfg = spec.base;

    if (raw.has("name")) spec.name = raw.single("name");

    // target tasks
    std::vector<std::string> task_names;
    if (raw.has("tasks")) task_names = raw.list("tasks");
    else if (raw.has("task")) task_names = raw.list("task");
    if (!task_names.empty()) {
        cfg.target_tasks.clear();
        for (const auto& t : task_names) {
            try {
                cfg.target_tasks.push_back(nn::task_from_name(t));
            } catch (const ad::TensorError&) {
                throw ConfigError("task", "invalid task '" + t + "'");
            }
        }
    }

    auto parse_aux = [](const std::string& s) {
        try {
            return nn::aux_from_name(s);
        } catch (const ad::TensorError&) {
            throw ConfigError("aux", "invalid aux '" + s + "'");
        }
    };
    auto parse_mode = [](const std::string& s) {
        try {
            return train::mode_from_name(s);
        } catch (const ad::TensorError&) {
            throw ConfigError("mode", "invalid mode '" + s + "'");
        }
    };

    if (raw.has("auxes"))
        for (const auto& a : raw.list("auxes")) spec.auxes.push_back(parse_aux(a));
    else if (raw.has("aux"))
        for (const auto& a : raw.list("aux")) spec.auxes.push_back(parse_aux(a));

    if (raw.has("modes"))
        for (const auto& m : raw.list("modes")) spec.modes.push_back(parse_mode(m));
    else if (raw.has("mode"))
        for (const auto& m : raw.list("mode")) spec.modes.push_back(parse_mode(m));

    if (raw.has("lambdas"))
        for (const auto& l : raw.list("lambdas")) spec.lambdas.push_back(to_double("lambda", l));
    else if (raw.has("lambda"))
        for (const auto& l : raw.list("lambda")) spec.lambdas.push_back(to_double("lambda", l));
    for (double l : spec.lambdas) {
        if (l < 0.0) throw ConfigError("lambda", "must be >= 0");
    }

    if (raw.has("fractions"))
        for (const auto& f : raw.list("fractions")) spec.fractions.push_back(to_double("fraction", f));
    else if (raw.has("fraction"))
        for (const auto& f : raw.list("fraction")) spec.fractions.push_back(to_double("fraction", f));
    for (double f : spec.fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fraction", "must be in (0,1]");
    }

    if (raw.has("seeds"))
        for (const auto& s : raw.list("seeds")) spec.seeds.push_back(uint64_t(to_int("seed", s)));
    else if (raw.has("seed"))
        for (const auto& s : raw.list("seed")) spec.seeds.push_back(uint64_t(to_int("seed", s)));
    if (spec.seeds.empty()) {
        if (const char* env = std::getenv("COMPL_SEED")) {
            spec.seeds.push_back(uint64_t(to_int("seed", env)));
        }
    }

    auto set_d = [&](const char* key, double& field) {
        if (raw.has(key)) field = to_double(key, raw.single(key));
    };
    auto set_i = [&](const char* key, int& field) {
        if (raw.has(key)) field = int(to_int(key, raw.single(key)));
    };
    set_d("lr", cfg.base_lr);
    set_d("momentum", cfg.momentum);
    set_d("weight_decay", cfg.weight_decay);
    set_d("poly_power", cfg.poly_power);
    set_i("iters", cfg.max_iters);
    if (raw.has("batch")) {
        cfg.batch_target = int(to_int("batch", raw.single("batch")));
        cfg.batch_aux = cfg.batch_target;
    }
    set_d("tau", cfg.tau);
    set_d("ema_momentum", cfg.ema_momentum);
    set_d("w_local", cfg.w_local);
    set_i("dense_grid", cfg.dense_grid);
    if (raw.has("crop")) {
        const int c = int(to_int("crop", raw.single("crop")));
        cfg.crop.crop_h = cfg.crop.crop_w = c;
    }
    set_i("train_size", cfg.train_size);
    set_i("val_size", cfg.val_size);
    if (raw.has("data_seed")) cfg.data_seed = uint64_t(to_int("data_seed", raw.single("data_seed")));
    if (raw.has("image_size")) {
        const int s = int(to_int("image_size", raw.single("image_size")));
        cfg.domain.h = cfg.domain.w = s;
    }
    set_i("classes", cfg.domain.class_count);
    cfg.seg_classes = cfg.domain.class_count;
    set_d("noise", cfg.domain.texture_noise_std);
    set_d("depth_near", cfg.domain.depth_near);
    set_d("depth_far", cfg.domain.depth_far);
    set_i("min_shapes", cfg.domain.min_shapes);
    set_i("max_shapes", cfg.domain.max_shapes);
    set_i("eval_every", cfg.eval_every);
    if (raw.has("eval_shifted")) spec.eval_shifted = to_bool("eval_shifted", raw.single("eval_shifted"));
    if (raw.has("record_walltime"))
        spec.record_walltime = to_bool("record_walltime", raw.single("record_walltime"));

    if (raw.has("crop_offset")) {
        cfg.crop.offset = int(to_int("crop_offset", raw.single("crop_offset")));
    } else {
        cfg.crop.offset = default_crop_offset(cfg.target_tasks.front());
    }

    // Fill singleton axes so the sweep degenerates to one run.
    if (spec.modes.empty()) spec.modes.push_back(cfg.mode);
    if (spec.auxes.empty()) spec.auxes.push_back(cfg.aux);
    if (spec.fractions.empty()) spec.fractions.push_back(cfg.labeled_fraction);
    if (spec.seeds.empty()) spec.seeds.push_back(1);

    // Single-value convenience fields also land in the base config.
    cfg.mode = spec.modes.front();
    cfg.aux = spec.auxes.front();
    cfg.labeled_fraction = spec.fractions.front();
    cfg.seed = spec.seeds.front();
    cfg.lambda = spec.lambdas.empty() ? default_lambda(cfg.aux) : spec.lambdas.front();

    // Validate sizes early with a meaningful field name.
    if (cfg.max_iters < 1) throw ConfigError("iters", "must be >= 1");
    if (cfg.batch_target < 1) throw ConfigError("batch", "must be >= 1");
    if (cfg.train_size < 1) throw ConfigError("train_size", "must be >= 1");
    if (cfg.val_size < 1) throw ConfigError("val_size", "must be >= 1");
    if (cfg.base_lr <= 0.0) throw ConfigError("lr", "must be > 0");
    if (cfg.tau <= 0.0) throw ConfigError("tau", "must be > 0");
    if (cfg.w_local < 0.0 || cfg.w_local > 1.0) throw ConfigError("w_local", "must be in [0,1]");

    return spec;
}

ExperimentSpec parse_config(const std::string& json_path,
                            const std::map<std::string, std::string>& overrides) {
    std::string text;
    if (!json_path.empty()) {
        std::ifstream is(json_path);
        if (!is) throw ConfigError("<file>", "cannot open " + json_path);
        std::ostringstream ss;
        ss << is.rdbuf();
        text = ss.str();
    }
    return parse_config_text(text, overrides);
}

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

std::string tasks_label(const std::vector<nn::Task>& tasks) {
    std::string out;
    for (size_t i = 0; i < tasks.size(); ++i) {
        if (i) out += "+";
        out += nn::task_name(tasks[i]);
    }
    return out;
}

}  // namespace

std::vector<ResultRow> run_matrix(const ExperimentSpec& spec, std::ostream* progress) {
    std::vector<ResultRow> rows;
    const size_t total_cells = spec.fractions.size() * spec.auxes.size() * spec.modes.size() *
                               std::max<size_t>(1, spec.lambdas.size()) * spec.seeds.size();
    size_t cell = 0;

    const std::vector<double> lambda_axis =
        spec.lambdas.empty() ? std::vector<double>{-1.0} : spec.lambdas;  // -1: default per aux

    for (double fraction : spec.fractions) {
        for (nn::Aux aux : spec.auxes) {
            for (train::Mode mode : spec.modes) {
                for (double lam : lambda_axis) {
                    for (uint64_t seed : spec.seeds) {
                        ++cell;
                        train::TrainConfig cfg = spec.base;
                        cfg.mode = mode;
                        cfg.aux = aux;
                        cfg.labeled_fraction = fraction;
                        cfg.seed = seed;
                        cfg.lambda = lam < 0.0 ? default_lambda(aux) : lam;

                        ResultRow base_row;
                        base_row.experiment = spec.name;
                        base_row.mode = mode_name(mode);
                        base_row.tasks = tasks_label(cfg.target_tasks);
                        base_row.aux = nn::aux_name(aux);
                        base_row.lambda = cfg.lambda;
                        base_row.fraction = fraction;
                        base_row.seed = seed;
                        base_row.iters = cfg.total_iters();

                        if (progress) {
                            *progress << "[" << cell << "/" << total_cells << "] mode=" << base_row.mode
                                      << " aux=" << base_row.aux << " lambda=" << cfg.lambda
                                      << " fraction=" << fraction << " seed=" << seed << "\n";
                            progress->flush();
                        }

                        const auto t0 = std::chrono::steady_clock::now();
                        try {
                            train::Datasets ds = train::build_datasets(cfg, spec.eval_shifted);
                            train::Trainer trainer(cfg, std::move(ds));
                            trainer.run();
                            const double wall =
                                spec.record_walltime
                                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                          .count()
                                    : 0.0;
                            for (nn::Task task : cfg.target_tasks) {
                                auto mv = trainer.evaluate(task, trainer.datasets().val);
                                ResultRow r = base_row;
                                r.eval_domain = "in_domain";
                                r.metric_name = mv.name;
                                r.metric_value = mv.value;
                                r.wall_seconds = wall;
                                rows.push_back(r);
                                if (spec.eval_shifted) {
                                    auto sv = trainer.evaluate(task, trainer.datasets().val_shifted);
                                    ResultRow rs = base_row;
                                    rs.eval_domain = "shifted";
                                    rs.metric_name = sv.name;
                                    rs.metric_value = sv.value;
                                    rs.wall_seconds = wall;
                                    rows.push_back(rs);
                                }
                            }
                        } catch (const std::exception& e) {
                            ResultRow r = base_row;
                            r.eval_domain = "in_domain";
                            r.metric_name = "error";
                            r.metric_value = 0.0;
                            rows.push_back(r);
                            if (progress) *progress << "  cell failed: " << e.what() << "\n";
                        }
                    }
                }
            }
        }
    }
    return rows;
}

std::string csv_header() {
    return "experiment,mode,tasks,aux,lambda,fraction,seed,eval_domain,metric_name,metric_value,"
           "iters,wall_seconds";
}

void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
    os << csv_header() << "\n";
    for (const auto& r : rows) {
        os << r.experiment << "," << r.mode << "," << r.tasks << "," << r.aux << ","
           << format_g6(r.lambda) << "," << format_g6(r.fraction) << "," << r.seed << ","
           << r.eval_domain << "," << r.metric_name << "," << format_g6(r.metric_value) << ","
           << r.iters << "," << format_g6(r.wall_seconds) << "\n";
    }
}

void emit_json(const std::vector<ResultRow>& rows, std::ostream& os) {
    json arr = json::array();
    for (const auto& r : rows) {
        json o;
        o["experiment"] = r.experiment;
        o["mode"] = r.mode;
        o["tasks"] = r.tasks;
        o["aux"] = r.aux;
        // Numeric fields round through the same 6-significant-digit text as
        // the CSV so the two formats parse identically.
        o["lambda"] = std::stod(format_g6(r.lambda));
        o["fraction"] = std::stod(format_g6(r.fraction));
        o["seed"] = r.seed;
        o["eval_domain"] = r.eval_domain;
        o["metric_name"] = r.metric_name;
        o["metric_value"] = std::stod(format_g6(r.metric_value));
        o["iters"] = r.iters;
        o["wall_seconds"] = std::stod(format_g6(r.wall_seconds));
        arr.push_back(o);
    }
    os << arr.dump(2) << "\n";
}

}  // namespace complearn::cli
