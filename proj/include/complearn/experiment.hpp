#pragma once
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "complearn/trainer.hpp"

namespace complearn::cli {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& field, const std::string& msg)
        : std::runtime_error("config error: field '" + field + "': " + msg), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Sweep description: the run set is the cartesian product of the axes.
struct ExperimentSpec {
    std::string name = "exp";
    train::TrainConfig base;
    std::vector<double> fractions;
    std::vector<nn::Aux> auxes;
    std::vector<train::Mode> modes;
    std::vector<double> lambdas;
    std::vector<uint64_t> seeds;
    bool eval_shifted = false;
    // Wall-clock timing makes the CSV non-reproducible byte-for-byte, so it
    // is opt-in; rows carry 0 otherwise.
    bool record_walltime = false;
};

struct ResultRow {
    std::string experiment;
    std::string mode;
    std::string tasks;
    std::string aux;
    double lambda = 0.0;
    double fraction = 1.0;
    uint64_t seed = 1;
    std::string eval_domain;  // in_domain | shifted
    std::string metric_name;
    double metric_value = 0.0;
    int iters = 0;
    double wall_seconds = 0.0;
};

// JSON config file (optional) + flag overrides; unknown keys and invalid
// values raise ConfigError naming the field. A missing seed falls back to
// the COMPL_SEED environment variable, then to 1.
ExperimentSpec parse_config(const std::string& json_path,
                            const std::map<std::string, std::string>& overrides);
ExperimentSpec parse_config_text(const std::string& json_text,
                                 const std::map<std::string, std::string>& overrides);

// Runs every cell of the sweep; a failing cell yields a metric_name="error"
// row and the matrix continues. Row order is deterministic.
std::vector<ResultRow> run_matrix(const ExperimentSpec& spec, std::ostream* progress);

std::string csv_header();
void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os);
void emit_json(const std::vector<ResultRow>& rows, std::ostream& os);

// Number formatting shared by both emitters: 6 significant digits.
std::string format_g6(double v);

// ---- gradient-check registry ----

struct GradCheckCase {
    std::string name;
    // Worst relative error across one randomized trial.
    std::function<double(Rng&)> run;
};

const std::vector<GradCheckCase>& gradcheck_registry();

struct GradCheckReport {
    struct Line {
        std::string name;
        double worst = 0.0;
        bool pass = false;
    };
    std::vector<Line> lines;
    bool all_pass = false;
};

GradCheckReport run_gradcheck(int trials = 10, double eps = 1e-5, double tol = 1e-4,
                              const std::vector<GradCheckCase>& extra = {});

}  // namespace complearn::cli
