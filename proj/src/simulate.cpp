#include "taildep/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace taildep {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32), 0x7a11d3bu};
    gen_ = std::mt19937_64(seq);
}

double RngStream::uniform() {
    // 53-bit mantissa, strictly inside (0,1).
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(2.0 * exponential());
    const double a = 2.0 * kPi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double RngStream::frechet() { return -1.0 / std::log(uniform()); }

double sample_positive_stable(double theta, RngStream& rng) {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("sample_positive_stable: theta must lie in (0,1]");
    if (theta == 1.0) return 1.0;
    // Kanter's representation: S = (a(U)/W)^{(1-theta)/theta} with
    // a(u) = sin((1-theta) pi u) sin(theta pi u)^{theta/(1-theta)}
    //        / sin(pi u)^{1/(1-theta)}.
    const double u = rng.uniform();
    const double w = rng.exponential();
    const double a = std::sin((1.0 - theta) * kPi * u) *
                     std::pow(std::sin(theta * kPi * u), theta / (1.0 - theta)) /
                     std::pow(std::sin(kPi * u), 1.0 / (1.0 - theta));
    return std::pow(a / w, (1.0 - theta) / theta);
}

DataMatrix sample_logistic(int n, int d, double theta, RngStream& rng) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_logistic: need n,d >= 1");
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("sample_logistic: theta must lie in (0,1]");
    DataMatrix out(n, d);
    for (int i = 0; i < n; ++i) {
        if (theta == 1.0) {
            for (int j = 0; j < d; ++j) out(i, j) = rng.frechet();
            continue;
        }
        const double s = sample_positive_stable(theta, rng);
        for (int j = 0; j < d; ++j)
            out(i, j) = std::pow(s / rng.exponential(), theta);
    }
    return out;
}

DataMatrix sample_maxlinear(int n, const MaxLinearCoeffs& coeffs, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_maxlinear: need n >= 1");
    coeffs.validate();
    DataMatrix out(n, coeffs.d);
    std::vector<double> z(coeffs.r);
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < coeffs.r; ++t) z[t] = rng.frechet();
        for (int j = 0; j < coeffs.d; ++j) {
            double m = 0.0;
            for (int t = 0; t < coeffs.r; ++t) m = std::max(m, coeffs.b(j, t) * z[t]);
            out(i, j) = m;
        }
    }
    return out;
}

DataMatrix sample_brown_resnick(int n, const GridLocations& locs, double alpha,
                                double rho, RngStream& rng, const BrAccuracy& acc,
                                BrSampleInfo* info) {
    if (n < 1) throw std::invalid_argument("sample_brown_resnick: need n >= 1");
    locs.validate();
    const int d = locs.size();

    // Variogram from the anchor of the increments (the coordinate origin).
    std::vector<double> gamma(d);
    for (int j = 0; j < d; ++j)
        gamma[j] = variogram(locs.s[j], alpha, rho);

    // Symmetric square root of cov(s,s') = gamma(s) + gamma(s') - gamma(s-s').
    SymMatrix cov(d);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            const double dx = locs.s[i][0] - locs.s[j][0];
            const double dy = locs.s[i][1] - locs.s[j][1];
            const double gij =
                (i == j) ? 0.0 : std::pow(std::hypot(dx, dy) / rho, alpha);
            cov.set(i, j, gamma[i] + gamma[j] - gij);
        }
    }
    const EigenDecomp dec = sym_eigen(cov);
    Matrix root(d, d);
    for (int k = 0; k < d; ++k) {
        const double s = std::sqrt(std::max(dec.values[k], 0.0));
        for (int i = 0; i < d; ++i) root(i, k) = dec.vectors(i, k) * s;
    }

    const double mean_corr = -*std::min_element(gamma.begin(), gamma.end());
    const double sigma_max =
        std::sqrt(2.0 * *std::max_element(gamma.begin(), gamma.end()));
    const double envelope = std::exp(mean_corr + 6.0 * sigma_max);

    DataMatrix out(n, d);
    std::vector<double> g(d), eps(d);
    for (int i = 0; i < n; ++i) {
        std::vector<double> y(d, 0.0);
        double big_gamma = 0.0;
        for (int point = 0; point < acc.max_points; ++point) {
            big_gamma += rng.exponential();
            const double xi = 1.0 / big_gamma;
            const double running_min = *std::min_element(y.begin(), y.end());
            if (running_min > 0.0 && xi * envelope < running_min) break;
            if (point == acc.max_points - 1 && info) ++info->cap_hits;

            for (int j = 0; j < d; ++j) g[j] = rng.normal();
            for (int j = 0; j < d; ++j) {
                double e = 0.0;
                for (int k = 0; k < d; ++k) e += root(j, k) * g[k];
                eps[j] = e;
            }
            for (int j = 0; j < d; ++j)
                y[j] = std::max(y[j], xi * std::exp(eps[j] - gamma[j]));
        }
        for (int j = 0; j < d; ++j) out(i, j) = y[j];
    }
    return out;
}

DataMatrix perturb_noise(const DataMatrix& data, double sd, RngStream& rng) {
    if (!(sd >= 0.0)) throw std::invalid_argument("perturb_noise: sd must be >= 0");
    DataMatrix out(data.n(), data.d());
    for (int i = 0; i < data.n(); ++i)
        for (int j = 0; j < data.d(); ++j)
            out(i, j) = data(i, j) + (sd > 0.0 ? std::abs(sd * rng.normal()) : 0.0);
    return out;
}

int SampleSpec::dim() const {
    if (model == "logistic") return d;
    if (model == "br") return grid_rows * grid_cols;
    if (model == "maxlinear") return dag ? dag->d : 0;
    return 0;
}

void SampleSpec::validate() const {
    if (n < 1) throw config_error("sample spec: n must be >= 1");
    if (!(noise_sd >= 0.0)) throw config_error("sample spec: noise sd must be >= 0");
    if (model == "logistic") {
        if (d < 2) throw config_error("sample spec: logistic needs d >= 2");
        if (!(theta > 0.0 && theta <= 1.0))
            throw config_error("sample spec: logistic theta must lie in (0,1]");
    } else if (model == "br") {
        if (grid_rows < 1 || grid_cols < 1)
            throw config_error("sample spec: br needs a grid geometry");
        if (!(alpha > 0.0 && alpha <= 2.0) || !(rho > 0.0))
            throw config_error("sample spec: br parameters out of range");
    } else if (model == "maxlinear") {
        if (!dag) throw config_error("sample spec: maxlinear needs a dag");
        dag->validate();
        if (static_cast<int>(dag_theta.size()) != dag->param_dim())
            throw config_error("sample spec: dag parameter count mismatch");
    } else {
        throw config_error("sample spec: unknown model '" + model + "'");
    }
}

DataMatrix sample_dataset(const SampleSpec& spec, std::uint64_t stream,
                          BrSampleInfo* info) {
    spec.validate();
    RngStream rng(spec.seed, stream);
    DataMatrix data;
    if (spec.model == "logistic") {
        data = sample_logistic(spec.n, spec.d, spec.theta, rng);
    } else if (spec.model == "br") {
        data = sample_brown_resnick(spec.n, GridLocations::unit_grid(spec.grid_rows, spec.grid_cols),
                                    spec.alpha, spec.rho, rng, {}, info);
    } else {
        data = sample_maxlinear(spec.n, dag_to_coeffs(*spec.dag, spec.dag_theta), rng);
    }
    if (spec.noise && spec.noise_sd > 0.0)
        data = perturb_noise(data, spec.noise_sd, rng);
    return data;
}

// ---------------------------------------------------------------------------
// Study harness

namespace {

ReplicateRecord run_replicate(const StudyConfig& cfg, int rep, int k) {
    ReplicateRecord rec;
    rec.replicate = rep;
    rec.k = k;
    try {
        const DataMatrix data = sample_dataset(cfg.sample, static_cast<std::uint64_t>(rep));
        const RankMatrix ranks = compute_ranks(data);
        TailFraction tf{k, cfg.estimator.k1};
        const FitInput input = FitInput::from_ranks(ranks, tf, cfg.points, cfg.estimator);
        const FitReport report = fit(input, *cfg.model, cfg.points, cfg.policy, cfg.optimizer);
        rec.estimate = report.theta;
        rec.objective = report.objective_min;
        if (cfg.collect_gof) rec.gof_statistic = k * report.objective_min;
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

}  // namespace

StudyResult mc_study(const StudyConfig& cfg) {
    if (cfg.replicates < 2) throw config_error("mc_study: need at least 2 replicates");
    if (cfg.model == nullptr) throw config_error("mc_study: no model");
    if (cfg.k_grid.empty()) throw config_error("mc_study: empty k grid");
    cfg.sample.validate();
    const int p = cfg.model->param_dim();
    if (static_cast<int>(cfg.truth.size()) != p)
        throw config_error("mc_study: truth vector has wrong dimension");

    const int jobs = cfg.jobs > 0
                         ? cfg.jobs
                         : std::max(1u, std::thread::hardware_concurrency());

    StudyResult result;
    for (int k : cfg.k_grid) {
        std::vector<ReplicateRecord> recs(cfg.replicates);
        std::atomic<int> next{0};
        auto worker = [&]() {
            while (true) {
                const int rep = next.fetch_add(1);
                if (rep >= cfg.replicates) break;
                recs[rep] = run_replicate(cfg, rep, k);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
        worker();
        for (std::thread& t : pool) t.join();

        std::vector<std::vector<double>> ok_estimates;
        for (ReplicateRecord& rec : recs) {
            if (rec.ok)
                ok_estimates.push_back(rec.estimate);
            else
                ++result.failures;
            result.replicates.push_back(std::move(rec));
        }
        if (ok_estimates.size() < 2)
            throw estimation_error("mc_study: fewer than two successful replicates at k=" +
                                   std::to_string(k));

        for (int j = 0; j < p; ++j) {
            double mean = 0.0;
            for (const auto& est : ok_estimates) mean += est[j];
            mean /= static_cast<double>(ok_estimates.size());
            double var = 0.0;
            for (const auto& est : ok_estimates) var += (est[j] - mean) * (est[j] - mean);
            var /= static_cast<double>(ok_estimates.size() - 1);
            StudyRow row;
            row.k = k;
            row.param = j;
            row.bias = mean - cfg.truth[j];
            row.sd = std::sqrt(var);
            row.rmse = std::sqrt(row.bias * row.bias + row.sd * row.sd);
            result.rows.push_back(row);
        }
    }
    return result;
}

}  // namespace taildep
