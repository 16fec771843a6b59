#include "taildep/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "taildep/gof.hpp"
#include "taildep/io.hpp"
#include "taildep/simulate.hpp"

namespace taildep {

namespace {

using ordered_json = nlohmann::ordered_json;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::vector<std::string> split_on(const std::string& s, char delim) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(s);
    while (std::getline(in, part, delim)) parts.push_back(part);
    return parts;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const std::string& part : split_on(s, ',')) {
        if (part.empty()) continue;
        out.push_back(std::stod(part));
    }
    return out;
}

std::unique_ptr<TailModel> build_model(const RunConfig& cfg, int d) {
    if (cfg.model == "logistic") return std::make_unique<LogisticModel>(d);
    if (cfg.model == "br") {
        if (cfg.grid_rows < 1 || cfg.grid_cols < 1)
            throw config_error("model br requires --grid RxC");
        if (cfg.grid_rows * cfg.grid_cols != d)
            throw config_error("grid size " + std::to_string(cfg.grid_rows * cfg.grid_cols) +
                               " does not match data dimension " + std::to_string(d));
        return std::make_unique<BrownResnickModel>(
            GridLocations::unit_grid(cfg.grid_rows, cfg.grid_cols));
    }
    if (cfg.model == "maxlinear") {
        if (cfg.dag_path.empty()) throw config_error("model maxlinear requires --dag FILE");
        Dag dag = read_dag_file(cfg.dag_path);
        if (dag.d != d)
            throw config_error("DAG has " + std::to_string(dag.d) +
                               " nodes but the data has " + std::to_string(d) +
                               " columns");
        return std::make_unique<MaxLinearDagModel>(std::move(dag));
    }
    throw config_error("unknown model '" + cfg.model + "'");
}

PointSet build_points(const RunConfig& cfg, int d) {
    if (cfg.points_spec.empty())
        throw config_error("--points is required (grid:levels:counts | pairs:a | "
                           "neighbours:maxdist | file:PATH)");
    const std::string& spec = cfg.points_spec;
    const size_t colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);

    if (kind == "grid") {
        const std::vector<std::string> parts = split_on(rest, ':');
        if (parts.size() != 2)
            throw config_error("--points grid:levels:counts, e.g. grid:0,0.5,1:2,3");
        const std::vector<double> levels = parse_double_list(parts[0]);
        std::vector<int> counts;
        for (double v : parse_double_list(parts[1])) counts.push_back(static_cast<int>(v));
        return grid_point_set(d, levels, counts);
    }
    if (kind == "pairs") {
        const int a = rest.empty() ? 2 : std::stoi(rest);
        return extremal_coeff_point_set(d, a);
    }
    if (kind == "neighbours") {
        if (cfg.grid_rows < 1 || cfg.grid_cols < 1)
            throw config_error("--points neighbours:maxdist requires --grid RxC");
        const double maxdist = rest.empty() ? std::sqrt(2.0) : std::stod(rest);
        return neighbour_pairs(GridLocations::unit_grid(cfg.grid_rows, cfg.grid_cols),
                               maxdist);
    }
    if (kind == "file") {
        if (rest.empty()) throw config_error("--points file:PATH needs a path");
        return read_point_file(rest, d);
    }
    throw config_error("unknown point-set spec '" + spec + "'");
}

WeightPolicy parse_weight(const std::string& w) {
    if (w == "identity") return WeightPolicy::identity();
    if (w == "optimal") return WeightPolicy::inverse_sigma();
    if (w.rfind("tikhonov", 0) == 0) {
        const size_t colon = w.find(':');
        if (colon == std::string::npos) return WeightPolicy::tikhonov();
        return WeightPolicy::tikhonov(std::stod(w.substr(colon + 1)));
    }
    throw config_error("unknown weight policy '" + w + "'");
}

EstimatorKind parse_estimator(const RunConfig& cfg) {
    EstimatorKind kind;
    kind.tau = cfg.tau;
    if (cfg.estimator == "shifted") {
        kind.tag = EstimatorKindTag::shifted;
    } else if (cfg.estimator == "raw") {
        kind.tag = EstimatorKindTag::raw;
    } else if (cfg.estimator == "kernel") {
        kind.tag = EstimatorKindTag::kernel;
    } else if (cfg.estimator == "biascorr") {
        kind.tag = EstimatorKindTag::bias_corrected;
        if (cfg.k1 < 1) throw config_error("estimator biascorr requires --k1");
        kind.k1 = cfg.k1;
    } else {
        throw config_error("unknown estimator '" + cfg.estimator + "'");
    }
    return kind;
}

struct GofSpec {
    std::string method;  // optimal | spectral
    double threshold = 0.1;
};

GofSpec parse_gof(const std::string& g) {
    if (g.empty() || g == "optimal") return {"optimal", 0.1};
    if (g.rfind("spectral", 0) == 0) {
        const size_t colon = g.find(':');
        if (colon == std::string::npos) return {"spectral", 0.1};
        return {"spectral", std::stod(g.substr(colon + 1))};
    }
    throw config_error("unknown gof method '" + g + "'");
}

SampleSpec build_sample_spec(const RunConfig& cfg) {
    SampleSpec spec;
    spec.model = cfg.model;
    spec.n = cfg.n;
    spec.seed = cfg.seed;
    spec.noise = cfg.noise;
    spec.noise_sd = cfg.noise_sd;
    if (cfg.model == "logistic") {
        spec.d = cfg.d;
        if (!cfg.theta.empty()) spec.theta = cfg.theta.front();
    } else if (cfg.model == "br") {
        spec.grid_rows = cfg.grid_rows;
        spec.grid_cols = cfg.grid_cols;
        spec.alpha = cfg.alpha;
        spec.rho = cfg.rho;
    } else if (cfg.model == "maxlinear") {
        if (cfg.dag_path.empty()) throw config_error("model maxlinear requires --dag FILE");
        spec.dag = read_dag_file(cfg.dag_path);
        spec.dag_theta = cfg.theta;
    } else {
        throw config_error("unknown model '" + cfg.model + "'");
    }
    return spec;
}

std::vector<double> truth_vector(const RunConfig& cfg, const SampleSpec& spec) {
    if (cfg.model == "logistic") return {spec.theta};
    if (cfg.model == "br") return {spec.alpha, spec.rho};
    return spec.dag_theta;
}

ordered_json config_echo(const RunConfig& cfg) {
    ordered_json j;
    j["command"] = cfg.command;
    j["input"] = cfg.input_path;
    j["output"] = cfg.output_path;
    j["model"] = cfg.model;
    if (!cfg.dag_path.empty()) j["dag"] = cfg.dag_path;
    if (cfg.grid_rows > 0) j["grid"] = std::to_string(cfg.grid_rows) + "x" +
                                       std::to_string(cfg.grid_cols);
    if (!cfg.points_spec.empty()) j["points"] = cfg.points_spec;
    j["k"] = cfg.k;
    if (!cfg.k_grid.empty()) j["k_grid"] = cfg.k_grid;
    j["estimator"] = cfg.estimator;
    if (cfg.estimator == "kernel" || cfg.estimator == "biascorr") j["tau"] = cfg.tau;
    if (cfg.k1 > 0) j["k1"] = cfg.k1;
    j["weight"] = cfg.weight;
    if (!cfg.gof.empty()) j["gof"] = cfg.gof;
    j["seed"] = cfg.seed;
    if (cfg.reps > 0) j["reps"] = cfg.reps;
    if (cfg.jobs > 0) j["jobs"] = cfg.jobs;
    if (cfg.n > 0) j["n"] = cfg.n;
    if (!cfg.theta.empty()) j["theta"] = cfg.theta;
    if (cfg.model == "br") {
        j["alpha"] = cfg.alpha;
        j["rho"] = cfg.rho;
    }
    if (cfg.noise) {
        j["noise"] = true;
        j["noise_sd"] = cfg.noise_sd;
    }
    ordered_json opt;
    opt["max_iter"] = cfg.optimizer.max_iter;
    opt["restarts"] = cfg.optimizer.restarts;
    opt["simplex_tol"] = cfg.optimizer.simplex_tol;
    opt["f_tol"] = cfg.optimizer.f_tol;
    opt["fd_step"] = cfg.optimizer.fd_step;
    j["optimizer"] = opt;
    return j;
}

ordered_json fit_to_json(const FitReport& report) {
    ordered_json j;
    j["theta_hat"] = report.theta;
    j["std_errors"] = report.std_errors;
    std::vector<std::vector<double>> cov(report.covariance.dim());
    for (int i = 0; i < report.covariance.dim(); ++i)
        for (int jj = 0; jj < report.covariance.dim(); ++jj)
            cov[i].push_back(report.covariance(i, jj));
    j["covariance"] = cov;
    j["objective"] = report.objective_min;
    ordered_json diag;
    diag["iterations"] = report.diagnostics.iterations;
    diag["restarts"] = report.diagnostics.restarts;
    diag["evaluations"] = report.diagnostics.evaluations;
    diag["converged"] = report.diagnostics.converged;
    diag["policy"] = report.diagnostics.policy;
    diag["estimator"] = report.diagnostics.estimator;
    diag["k"] = report.diagnostics.k;
    diag["q"] = report.diagnostics.q;
    j["diagnostics"] = diag;
    j["warnings"] = report.diagnostics.warnings;
    return j;
}

ordered_json gof_to_json(const GofResult& gof) {
    ordered_json j;
    j["method"] = gof.method;
    j["statistic"] = gof.statistic;
    j["df"] = gof.df;
    j["p_value"] = gof.p_value;
    if (gof.method == "spectral") {
        j["s"] = gof.s;
        j["eigenvalues"] = gof.eigenvalues;
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw config_error("cannot write '" + path + "'");
    out << text << '\n';
}

int classify_error(const std::exception& e) {
    if (dynamic_cast<const config_error*>(&e)) return 1;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 1;
    return 2;
}

RunResult error_result(const RunConfig& cfg, const std::exception& e) {
    ordered_json j;
    j["version"] = kVersion;
    j["config"] = config_echo(cfg);
    j["error"] = e.what();
    const int code = classify_error(e);
    RunResult res{code, j.dump(2)};
    std::cerr << "taildep " << cfg.command << ": " << e.what() << "\n";
    try {
        write_text(cfg.output_path, res.report_json);
    } catch (const std::exception&) {
        // the error report is best effort
    }
    return res;
}

// Shared fit pipeline for the fit and gof commands.
struct FitContext {
    std::unique_ptr<TailModel> model;
    PointSet points;
    WeightPolicy policy;
    EstimatorKind kind;
    RankMatrix ranks;
    int n = 0;
    int d = 0;
};

FitContext prepare_fit(const RunConfig& cfg) {
    if (cfg.input_path.empty()) throw config_error("--input CSV is required");
    if (cfg.k < 1 && cfg.k_grid.empty()) throw config_error("--k (or --k-grid) is required");
    FitContext ctx;
    const DataMatrix data = read_csv_matrix(cfg.input_path);
    ctx.n = data.n();
    ctx.d = data.d();
    if (ctx.d < 2) throw config_error("fit needs at least two data columns");
    ctx.model = build_model(cfg, ctx.d);
    ctx.points = build_points(cfg, ctx.d);
    if (ctx.points.q() < ctx.model->param_dim())
        throw config_error("q must be >= p (q=" + std::to_string(ctx.points.q()) +
                           ", p=" + std::to_string(ctx.model->param_dim()) + ")");
    ctx.policy = parse_weight(cfg.weight);
    ctx.kind = parse_estimator(cfg);
    ctx.ranks = compute_ranks(data);
    return ctx;
}

FitReport fit_at_k(const FitContext& ctx, const RunConfig& cfg, int k) {
    TailFraction tf{k, ctx.kind.k1};
    tf.validate(ctx.ranks.n());
    const FitInput input = FitInput::from_ranks(ctx.ranks, tf, ctx.points, ctx.kind);
    return fit(input, *ctx.model, ctx.points, ctx.policy, cfg.optimizer);
}

}  // namespace

RunResult run_simulate(const RunConfig& cfg) {
    const Timer timer;
    try {
        if (cfg.output_path.empty()) throw config_error("--output CSV path is required");
        if (cfg.n < 1) throw config_error("--n is required");
        const SampleSpec spec = build_sample_spec(cfg);
        BrSampleInfo info;
        const DataMatrix data = sample_dataset(spec, 0, &info);
        write_csv_matrix(cfg.output_path, data);

        ordered_json meta;
        meta["version"] = kVersion;
        meta["config"] = config_echo(cfg);
        meta["seed"] = spec.seed;
        meta["n"] = data.n();
        meta["d"] = data.d();
        if (spec.model == "br") {
            meta["approximate"] = true;
            meta["cap_hits"] = info.cap_hits;
        }
        meta["wall_time_ms"] = timer.ms();
        write_text(cfg.output_path + ".meta.json", meta.dump(2));
        return {0, meta.dump(2)};
    } catch (const std::exception& e) {
        return error_result(cfg, e);
    }
}

RunResult run_fit(const RunConfig& cfg) {
    const Timer timer;
    try {
        const FitContext ctx = prepare_fit(cfg);

        ordered_json j;
        j["version"] = kVersion;
        j["config"] = config_echo(cfg);
        j["n"] = ctx.n;
        j["d"] = ctx.d;
        j["q"] = ctx.points.q();
        j["p"] = ctx.model->param_dim();

        if (!cfg.k_grid.empty()) {
            // k-sweep diagnostic: one fit per k on the grid.
            ordered_json sweep = ordered_json::array();
            for (int k : cfg.k_grid) {
                const FitReport report = fit_at_k(ctx, cfg, k);
                ordered_json item = fit_to_json(report);
                item["k"] = k;
                sweep.push_back(item);
            }
            j["k_sweep"] = sweep;
        } else {
            const FitReport report = fit_at_k(ctx, cfg, cfg.k);
            j.update(fit_to_json(report));
            j["k"] = cfg.k;
        }
        j["wall_time_ms"] = timer.ms();
        const std::string text = j.dump(2);
        write_text(cfg.output_path, text);
        if (cfg.output_path.empty()) std::cout << text << "\n";
        return {0, text};
    } catch (const std::exception& e) {
        return error_result(cfg, e);
    }
}

RunResult run_gof(const RunConfig& cfg) {
    const Timer timer;
    try {
        const GofSpec gof_spec = parse_gof(cfg.gof);
        const FitContext ctx = prepare_fit(cfg);
        if (gof_spec.method == "optimal" &&
            ctx.policy.kind != WeightKind::inverse_sigma)
            throw config_error("--gof optimal requires --weight optimal");

        const FitReport report = fit_at_k(ctx, cfg, cfg.k);

        GofResult gof;
        if (gof_spec.method == "optimal") {
            gof = gof_optimal(report);
        } else {
            TailFraction tf{cfg.k, ctx.kind.k1};
            const FitInput input =
                FitInput::from_ranks(ctx.ranks, tf, ctx.points, ctx.kind);
            gof = gof_spectral_at(input.lhat, *ctx.model, report.theta, ctx.points,
                                  ctx.policy, cfg.k, gof_spec.threshold,
                                  input.sigma_scale, cfg.optimizer.fd_step);
        }

        ordered_json j;
        j["version"] = kVersion;
        j["config"] = config_echo(cfg);
        j["n"] = ctx.n;
        j["d"] = ctx.d;
        j["q"] = ctx.points.q();
        j["p"] = ctx.model->param_dim();
        j.update(fit_to_json(report));
        j["k"] = cfg.k;
        j["gof"] = gof_to_json(gof);
        j["wall_time_ms"] = timer.ms();
        const std::string text = j.dump(2);
        write_text(cfg.output_path, text);
        if (cfg.output_path.empty()) std::cout << text << "\n";
        return {0, text};
    } catch (const singular_matrix_error& e) {
        const estimation_error wrapped(
            std::string(e.what()) +
            " (try --weight tikhonov together with --gof spectral)");
        return error_result(cfg, wrapped);
    } catch (const std::exception& e) {
        return error_result(cfg, e);
    }
}

RunResult run_study(const RunConfig& cfg) {
    const Timer timer;
    try {
        if (cfg.output_path.empty()) throw config_error("--output CSV path is required");
        if (cfg.reps < 2) throw config_error("--reps must be >= 2");

        StudyConfig study;
        study.sample = build_sample_spec(cfg);
        if (cfg.n < 1) throw config_error("--n is required");
        const int d = study.sample.dim();
        std::unique_ptr<TailModel> model = build_model(cfg, d);
        study.model = model.get();
        study.points = build_points(cfg, d);
        study.k_grid = cfg.k_grid.empty() ? std::vector<int>{cfg.k} : cfg.k_grid;
        if (study.k_grid.front() < 1) throw config_error("--k (or --k-grid) is required");
        study.estimator = parse_estimator(cfg);
        study.policy = parse_weight(cfg.weight);
        study.optimizer = cfg.optimizer;
        study.truth = truth_vector(cfg, study.sample);
        study.replicates = cfg.reps;
        study.jobs = cfg.jobs;
        study.collect_gof = true;

        const StudyResult result = mc_study(study);

        std::ostringstream csv;
        csv.precision(17);
        const std::vector<ParamBound> box = model->param_box();
        csv << "k,param,name,bias,sd,rmse\n";
        for (const StudyRow& row : result.rows) {
            csv << row.k << ',' << row.param << ',' << box[row.param].name << ','
                << row.bias << ',' << row.sd << ',' << row.rmse << '\n';
        }
        write_text(cfg.output_path, csv.str());

        if (cfg.dump_reps) {
            std::ostringstream dump;
            dump.precision(17);
            dump << "replicate,k";
            for (const ParamBound& b : box) dump << ',' << b.name;
            dump << ",objective,gof_stat,ok\n";
            for (const ReplicateRecord& rec : result.replicates) {
                dump << rec.replicate << ',' << rec.k;
                for (size_t j = 0; j < box.size(); ++j)
                    dump << ',' << (rec.ok ? rec.estimate[j] : 0.0);
                dump << ',' << rec.objective << ','
                     << (rec.gof_statistic ? *rec.gof_statistic : 0.0) << ','
                     << (rec.ok ? 1 : 0) << '\n';
            }
            write_text(cfg.output_path + ".reps.csv", dump.str());
        }

        ordered_json j;
        j["version"] = kVersion;
        j["config"] = config_echo(cfg);
        j["rows"] = result.rows.size();
        j["failures"] = result.failures;
        j["wall_time_ms"] = timer.ms();
        return {0, j.dump(2)};
    } catch (const std::exception& e) {
        return error_result(cfg, e);
    }
}

int run_command(int argc, const char* const* argv) {
    RunConfig cfg;
    std::string grid_spec;
    std::string theta_spec;
    std::string k_grid_spec;

    CLI::App app{"weighted least-squares estimation of parametric tail dependence"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input_path, "input CSV path");
        sub->add_option("--output", cfg.output_path, "output path");
        sub->add_option("--model", cfg.model, "logistic | br | maxlinear");
        sub->add_option("--dag", cfg.dag_path, "DAG file (parent child param_name)");
        sub->add_option("--grid", grid_spec, "grid geometry RxC");
        sub->add_option("--points", cfg.points_spec,
                        "grid:levels:counts | pairs:a | neighbours:maxdist | file:PATH");
        sub->add_option("--k", cfg.k, "tail fraction");
        sub->add_option("--k-grid", k_grid_spec, "comma-separated tail fractions");
        sub->add_option("--estimator", cfg.estimator, "shifted | raw | kernel | biascorr");
        sub->add_option("--tau", cfg.tau, "power-kernel exponent");
        sub->add_option("--k1", cfg.k1, "bias-correction level");
        sub->add_option("--weight", cfg.weight, "identity | optimal | tikhonov[:c]");
        sub->add_option("--gof", cfg.gof, "optimal | spectral[:thresh]");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--reps", cfg.reps, "replicates");
        sub->add_option("--jobs", cfg.jobs, "worker threads for studies");
        sub->add_flag("--dump-reps", cfg.dump_reps, "also write per-replicate estimates");
        sub->add_option("--n", cfg.n, "sample size to simulate");
        sub->add_option("--d", cfg.d, "dimension (logistic)");
        sub->add_option("--theta", theta_spec, "model parameters, comma separated");
        sub->add_option("--alpha", cfg.alpha, "variogram exponent");
        sub->add_option("--rho", cfg.rho, "variogram scale");
        sub->add_flag("--noise", cfg.noise, "add |N(0,sd^2)| noise");
        sub->add_option("--noise-sd", cfg.noise_sd, "noise standard deviation");
        sub->add_option("--max-iter", cfg.optimizer.max_iter, "optimizer iterations per restart");
        sub->add_option("--restarts", cfg.optimizer.restarts, "optimizer multistarts");
        sub->add_option("--simplex-tol", cfg.optimizer.simplex_tol, "simplex diameter tolerance");
        sub->add_option("--f-tol", cfg.optimizer.f_tol, "objective spread tolerance");
        sub->add_option("--fd-step", cfg.optimizer.fd_step, "Jacobian finite-difference step");
    };

    CLI::App* sim = app.add_subcommand("simulate", "draw a dataset and write it as CSV");
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit a tail dependence model to CSV data");
    CLI::App* gof_cmd = app.add_subcommand("gof", "fit and test goodness-of-fit");
    CLI::App* study = app.add_subcommand("study", "Monte Carlo bias/sd/RMSE study");
    for (CLI::App* sub : {sim, fit_cmd, gof_cmd, study}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!grid_spec.empty()) {
            const size_t x = grid_spec.find_first_of("xX");
            if (x == std::string::npos)
                throw config_error("--grid expects RxC, e.g. 3x4");
            cfg.grid_rows = std::stoi(grid_spec.substr(0, x));
            cfg.grid_cols = std::stoi(grid_spec.substr(x + 1));
        }
        if (!theta_spec.empty()) cfg.theta = parse_double_list(theta_spec);
        if (!k_grid_spec.empty()) {
            for (double v : parse_double_list(k_grid_spec))
                cfg.k_grid.push_back(static_cast<int>(v));
        }
    } catch (const std::exception& e) {
        std::cerr << "taildep: " << e.what() << "\n";
        return 1;
    }

    if (sim->parsed()) {
        cfg.command = "simulate";
        return run_simulate(cfg).exit_code;
    }
    if (fit_cmd->parsed()) {
        cfg.command = "fit";
        return run_fit(cfg).exit_code;
    }
    if (gof_cmd->parsed()) {
        cfg.command = "gof";
        if (cfg.weight == "identity" && cfg.gof.empty()) cfg.weight = "optimal";
        if (cfg.weight == "identity" && parse_gof(cfg.gof).method == "optimal")
            cfg.weight = "optimal";
        return run_gof(cfg).exit_code;
    }
    cfg.command = "study";
    return run_study(cfg).exit_code;
}

}  // namespace taildep
