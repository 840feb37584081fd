// Command-line experiment runner: single runs, sweep matrices, checkpoint
// evaluation, the gradient-check suite, and synthetic dataset dumps.
//
// Exit codes: 0 success, 1 gradcheck/acceptance failure, 2 config error,
// 3 I/O error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "complearn/experiment.hpp"

namespace cl = complearn;

namespace {

struct CommonFlags {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

void add_override_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-c,--config", flags.config_path, "JSON config file");
    static const std::vector<std::string> keys = {
        "name",       "mode",        "modes",      "task",       "tasks",      "aux",
        "auxes",      "lambda",      "lambdas",    "fraction",   "fractions",  "seed",
        "seeds",      "lr",          "momentum",   "weight_decay", "poly_power", "iters",
        "batch",      "tau",         "ema_momentum", "w_local",  "dense_grid", "crop",
        "crop_offset", "train_size", "val_size",   "data_seed",  "image_size", "classes",
        "noise",      "depth_near",  "depth_far",  "min_shapes", "max_shapes", "eval_every",
        "eval_shifted", "record_walltime"};
    for (const auto& key : keys) {
        cmd->add_option_function<std::string>(
            "--" + key, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
            "override config field '" + key + "'");
    }
}

int write_rows(const std::vector<cl::cli::ResultRow>& rows, const std::string& out_path,
               const std::string& format) {
    std::ostringstream buf;
    if (format == "json") {
        cl::cli::emit_json(rows, buf);
    } else {
        cl::cli::emit_csv(rows, buf);
    }
    if (out_path.empty()) {
        std::cout << buf.str();
        return 0;
    }
    std::ofstream os(out_path, std::ios::binary);
    if (!os) {
        std::cerr << "cannot open " << out_path << " for writing\n";
        return 3;
    }
    os << buf.str();
    return os ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"composite-learning experiment runner"};
    app.require_subcommand(1);

    CommonFlags train_flags, sweep_flags, eval_flags, gen_flags;
    std::string out_path, format = "csv", history_path, eval_log_path, ckpt_path;
    std::string gen_out = "dataset", gen_domain = "a";
    int gen_count = 64;
    uint64_t gen_seed = 9001;
    bool inject_fault = false;

    CLI::App* train_cmd = app.add_subcommand("train", "single training run");
    add_override_flags(train_cmd, train_flags);
    train_cmd->add_option("-o,--out", out_path, "result rows file (default: stdout)");
    train_cmd->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
    train_cmd->add_option("--history", history_path, "per-iteration loss CSV");
    train_cmd->add_option("--eval-log", eval_log_path, "periodic eval CSV");
    train_cmd->add_option("--save-ckpt", ckpt_path, "write final checkpoint here");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run the experiment matrix");
    add_override_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("-o,--out", out_path, "result rows file (default: stdout)");
    sweep_cmd->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_override_flags(eval_cmd, eval_flags);
    eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint to load")->required();
    eval_cmd->add_option("-o,--out", out_path, "result rows file (default: stdout)");
    eval_cmd->add_option("--format", format, "csv|json")->check(CLI::IsMember({"csv", "json"}));

    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck_cmd->add_flag("--inject-fault", inject_fault,
                            "register a deliberately wrong gradient (test hook)");

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "dump a synthetic dataset");
    add_override_flags(gen_cmd, gen_flags);
    gen_cmd->add_option("-o,--out", gen_out, "output path prefix");
    gen_cmd->add_option("-n,--count", gen_count, "number of samples");
    gen_cmd->add_option("--gen-seed", gen_seed, "dataset seed");
    gen_cmd->add_option("--domain", gen_domain, "a (in-domain) or b (shifted)")
        ->check(CLI::IsMember({"a", "b"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            auto spec = cl::cli::parse_config(train_flags.config_path, train_flags.overrides);
            cl::train::TrainConfig cfg = spec.base;
            cl::train::Datasets ds = cl::train::build_datasets(cfg, spec.eval_shifted);
            std::cerr << "train: mode=" << cl::train::mode_name(cfg.mode)
                      << " aux=" << cl::nn::aux_name(cfg.aux) << " iters=" << cfg.total_iters()
                      << " seed=" << cfg.seed << "\n";
            cl::train::Trainer trainer(cfg, std::move(ds));
            trainer.run();
            if (!history_path.empty()) {
                std::ofstream hs(history_path);
                if (!hs) {
                    std::cerr << "cannot open " << history_path << "\n";
                    return 3;
                }
                cl::train::history_csv(trainer.history(), hs);
            }
            if (!eval_log_path.empty()) {
                std::ofstream es(eval_log_path);
                if (!es) {
                    std::cerr << "cannot open " << eval_log_path << "\n";
                    return 3;
                }
                es << "iter,task,metric,value\n";
                for (const auto& e : trainer.history().evals) {
                    es << e.iter << "," << e.task << "," << e.metric << ","
                       << cl::cli::format_g6(e.value) << "\n";
                }
            }
            if (!ckpt_path.empty()) trainer.save_checkpoint(ckpt_path);

            std::vector<cl::cli::ResultRow> rows;
            for (cl::nn::Task task : cfg.target_tasks) {
                auto mv = trainer.evaluate(task, trainer.datasets().val);
                cl::cli::ResultRow r;
                r.experiment = spec.name;
                r.mode = cl::train::mode_name(cfg.mode);
                r.tasks = cl::nn::task_name(task);
                r.aux = cl::nn::aux_name(cfg.aux);
                r.lambda = cfg.lambda;
                r.fraction = cfg.labeled_fraction;
                r.seed = cfg.seed;
                r.eval_domain = "in_domain";
                r.metric_name = mv.name;
                r.metric_value = mv.value;
                r.iters = cfg.total_iters();
                rows.push_back(r);
                if (spec.eval_shifted) {
                    auto sv = trainer.evaluate(task, trainer.datasets().val_shifted);
                    cl::cli::ResultRow rs = r;
                    rs.eval_domain = "shifted";
                    rs.metric_name = sv.name;
                    rs.metric_value = sv.value;
                    rows.push_back(rs);
                }
            }
            return write_rows(rows, out_path, format);
        }

        if (sweep_cmd->parsed()) {
            auto spec = cl::cli::parse_config(sweep_flags.config_path, sweep_flags.overrides);
            auto rows = cl::cli::run_matrix(spec, &std::cerr);
            return write_rows(rows, out_path, format);
        }

        if (eval_cmd->parsed()) {
            auto spec = cl::cli::parse_config(eval_flags.config_path, eval_flags.overrides);
            cl::train::TrainConfig cfg = spec.base;
            cl::train::Datasets ds = cl::train::build_datasets(cfg, true);
            cl::train::Trainer trainer(cfg, std::move(ds));
            trainer.load_checkpoint(ckpt_path);
            std::vector<cl::cli::ResultRow> rows;
            for (cl::nn::Task task : cfg.target_tasks) {
                for (bool shifted : {false, true}) {
                    auto mv = trainer.evaluate(task, shifted ? trainer.datasets().val_shifted
                                                             : trainer.datasets().val);
                    cl::cli::ResultRow r;
                    r.experiment = spec.name;
                    r.mode = cl::train::mode_name(cfg.mode);
                    r.tasks = cl::nn::task_name(task);
                    r.aux = cl::nn::aux_name(cfg.aux);
                    r.lambda = cfg.lambda;
                    r.fraction = cfg.labeled_fraction;
                    r.seed = cfg.seed;
                    r.eval_domain = shifted ? "shifted" : "in_domain";
                    r.metric_name = mv.name;
                    r.metric_value = mv.value;
                    r.iters = trainer.iter();
                    rows.push_back(r);
                }
            }
            return write_rows(rows, out_path, format);
        }

        if (gradcheck_cmd->parsed()) {
            std::vector<cl::cli::GradCheckCase> extra;
            if (inject_fault) {
                extra.push_back({"injected_fault", [](cl::Rng&) { return 1.0; }});
            }
            auto report = cl::cli::run_gradcheck(10, 1e-5, 1e-4, extra);
            for (const auto& line : report.lines) {
                std::printf("%-20s worst_rel_err %.3e  %s\n", line.name.c_str(), line.worst,
                            line.pass ? "PASS" : "FAIL");
            }
            std::printf("gradcheck: %s\n", report.all_pass ? "ALL PASS" : "FAILURES PRESENT");
            return report.all_pass ? 0 : 1;
        }

        if (gen_cmd->parsed()) {
            auto spec = cl::cli::parse_config(gen_flags.config_path, gen_flags.overrides);
            cl::data::DomainParams params = spec.base.domain;
            if (gen_domain == "b") params = cl::data::shifted_domain(params);
            auto samples = cl::data::make_dataset(gen_count, gen_seed, params);
            cl::data::dataset_save(gen_out, samples, params);
            std::cerr << "wrote " << samples.size() << " samples to " << gen_out << ".{bin,json}\n";
            return 0;
        }
    } catch (const cl::cli::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
