#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/parallel.hpp"
#include "hetreg/rng.hpp"
#include "hetreg/soglasso.hpp"
#include "hetreg/tuning.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

enum class Loss { huber, squared };
enum class Structure { overlapping_clusters, singleton_lasso };

struct FixedTuning {
    double lambda = 0.0;
    double gamma = 0.5;
};

struct EngineConfig {
    int K = 1;
    int starts = 20;
    double outer_tol = 1e-3;  // absolute change of the objective
    int max_outer_iter = 100;
    Loss loss = Loss::huber;
    Structure structure = Structure::overlapping_clusters;
    std::uint64_t seed = 0;
    bool standardize = true;
    bool intercept = true;
    // Tuning: fixed pair, or five-fold CV inside every update step.
    std::optional<FixedTuning> fixed_tuning;
    // Delta: fixed value, or refreshed from subgroup residuals each update.
    std::optional<double> fixed_delta;
    TuningGrid grid;
    int threads = 0;  // 0 = hardware concurrency
    double solver_tol = 1e-5;
    int solver_max_iter = 10000;
    double cv_solver_tol = 1e-3;
    int cv_solver_max_iter = 100;
};

struct Standardization {
    bool enabled = false;
    Vector center;  // length p; zero when not centering
    Vector scale;   // length p; ones when disabled
};

struct StartRecord {
    int start_index = 0;
    std::uint64_t stream_seed = 0;
    std::vector<int> initial_labels;
    int iterations = 0;
    double objective = 0.0;
    bool converged = false;
    bool repair_used = false;
};

struct FitResult {
    Partition partition;
    std::vector<SubgroupModel> models;  // original column scale
    double objective = 0.0;
    std::vector<StartRecord> starts;
    EngineConfig config;
    Standardization standardization;
};

struct StartOutcome {
    double objective = std::numeric_limits<double>::infinity();
    Partition partition;
    std::vector<SubgroupModel> models;
    int iterations = 0;
    bool converged = false;
    bool repair_used = false;
    std::vector<int> initial_labels;
    // Objective after each half step: [update_1, assign_1, update_2, ...].
    std::vector<double> trajectory;
};

/// Uniform random assignment of n samples to K subgroups, resampled until
/// every subgroup is nonempty.
inline Partition init_partition(Eigen::Index n, int K, Rng& rng) {
    if (K < 1 || n < K) {
        throw invalid_config_error("init_partition: need n >= K >= 1");
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        std::vector<int> count(static_cast<std::size_t>(K), 0);
        for (auto& g : labels) {
            g = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(K)));
            ++count[static_cast<std::size_t>(g)];
        }
        if (std::all_of(count.begin(), count.end(),
                        [](int c) { return c > 0; })) {
            return Partition(std::move(labels), K);
        }
    }
    // Unreachable for n >= K with a sane generator: force a valid draw.
    for (Eigen::Index i = 0; i < n; ++i) {
        labels[static_cast<std::size_t>(i)] = static_cast<int>(i % K);
    }
    return Partition(std::move(labels), K);
}

/// Nearest-subgroup relabeling: each sample goes to the subgroup whose model
/// gives the smallest Huber residual loss (that subgroup's own delta), ties
/// to the smallest index. If a subgroup empties, the sample with the largest
/// Huber loss under its own current model is moved into it.
inline Partition assignment_step(const Dataset& data,
                                 const std::vector<SubgroupModel>& models) {
    const int K = static_cast<int>(models.size());
    if (K < 1) throw invalid_input_error("assignment_step: no models");
    const Eigen::Index n = data.n();
    Matrix losses(n, K);
    for (int k = 0; k < K; ++k) {
        Vector r = data.y() - data.X() * models[static_cast<std::size_t>(k)].beta;
        if (models[static_cast<std::size_t>(k)].intercept) {
            r.array() -= *models[static_cast<std::size_t>(k)].intercept;
        }
        const double dk = models[static_cast<std::size_t>(k)].delta;
        for (Eigen::Index i = 0; i < n; ++i) {
            losses(i, k) = huber_value(r[i], dk);
        }
    }
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        for (int k = 1; k < K; ++k) {
            if (losses(i, k) < losses(i, best)) best = k;
        }
        labels[static_cast<std::size_t>(i)] = best;
    }

    // Empty-subgroup repair.
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (int g : labels) ++count[static_cast<std::size_t>(g)];
    for (int k = 0; k < K; ++k) {
        if (count[static_cast<std::size_t>(k)] > 0) continue;
        Eigen::Index worst = -1;
        double worst_loss = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int g = labels[static_cast<std::size_t>(i)];
            if (count[static_cast<std::size_t>(g)] <= 1) continue;
            if (losses(i, g) > worst_loss) {
                worst_loss = losses(i, g);
                worst = i;
            }
        }
        if (worst >= 0) {
            --count[static_cast<std::size_t>(labels[static_cast<std::size_t>(worst)])];
            labels[static_cast<std::size_t>(worst)] = k;
            ++count[static_cast<std::size_t>(k)];
        }
    }
    return Partition(std::move(labels), K);
}

/// Subgroup membership and response prediction for one sample. The rule
/// needs the observed response; without it the subgroup is undefined unless
/// an explicit fallback label is supplied.
inline std::pair<int, double> predict(const std::vector<SubgroupModel>& models,
                                      const Eigen::Ref<const Vector>& x,
                                      std::optional<double> y,
                                      std::optional<int> fallback_label = {}) {
    const int K = static_cast<int>(models.size());
    if (K < 1) throw invalid_input_error("predict: no models");
    if (!y) {
        if (!fallback_label) {
            throw unsupported_prediction_error(
                "predict: subgroup assignment requires the response value; "
                "supply y or configure a fallback label");
        }
        const int k = *fallback_label;
        if (k < 0 || k >= K) {
            throw invalid_parameter_error("predict: fallback label out of range");
        }
        return {k, models[static_cast<std::size_t>(k)].predict(x)};
    }
    int best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const auto& m = models[static_cast<std::size_t>(k)];
        const double loss = huber_value(*y - m.predict(x), m.delta);
        if (loss < best_loss) {
            best_loss = loss;
            best = k;
        }
    }
    return {best, models[static_cast<std::size_t>(best)].predict(x)};
}

namespace detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Algorithm driver. Holds the (optionally standardized) expanded design so
/// per-subgroup solves are row gathers. All state below is immutable after
/// construction; run_single_start keeps its own private state, so starts can
/// run concurrently.
class Engine {
public:
    Engine(const Dataset& data, EngineConfig cfg, ClusterStructure clusters)
        : data_(data),
          cfg_(std::move(cfg)),
          cs_(cfg_.structure == Structure::singleton_lasso
                  ? ClusterStructure::singletons(data.p())
                  : std::move(clusters)) {
        if (cfg_.K < 1) throw invalid_config_error("Engine: K must be >= 1");
        if (data_.n() < cfg_.K) {
            throw invalid_config_error("Engine: fewer samples than subgroups");
        }
        if (cfg_.starts < 1) {
            throw invalid_config_error("Engine: starts must be >= 1");
        }
        if (cs_.p() != data_.p()) {
            throw invalid_structure_error("Engine: structure does not match p");
        }
        cfg_.grid.validate();

        const Eigen::Index p = data_.p();
        st_.enabled = cfg_.standardize;
        st_.center = Vector::Zero(p);
        st_.scale = Vector::Ones(p);
        Matrix Xw = data_.X();
        if (cfg_.standardize) {
            for (Eigen::Index j = 0; j < p; ++j) {
                if (cfg_.intercept) {
                    st_.center[j] = Xw.col(j).mean();
                    Xw.col(j).array() -= st_.center[j];
                }
                const double sd =
                    std::sqrt(Xw.col(j).squaredNorm() /
                              std::max<Eigen::Index>(1, data_.n() - 1));
                st_.scale[j] = sd > 0.0 ? sd : 1.0;
                Xw.col(j) /= st_.scale[j];
            }
        }
        Xtil_ = duplicate_design(Xw, cs_);

        const double yscale = mad(data_.y());
        delta_floor_ = 1e-6 * (yscale > 0.0 ? yscale : 1.0);
        squared_surrogate_delta_ = 1e12 * (yscale > 0.0 ? yscale : 1.0);

        tuning_grid_ = cfg_.grid;
        if (cs_.all_singletons()) {
            // Singleton blocks make the penalty gamma-free; a single grid
            // column suffices and its lambda_max is exact.
            tuning_grid_.gammas = {1.0};
        }
    }

    const ClusterStructure& structure() const { return cs_; }
    const Standardization& standardization() const { return st_; }
    const EngineConfig& config() const { return cfg_; }

    Partition draw_partition(Rng& rng) const {
        return init_partition(data_.n(), cfg_.K, rng);
    }

    StartOutcome run_single_start(std::uint64_t stream_seed) const {
        Rng rng(stream_seed);
        return run_from(draw_partition(rng), stream_seed);
    }

    /// One full alternation from a given initial partition. fold_seed feeds
    /// the CV fold draws (mixed with the subgroup member set, so relabeling
    /// subgroups does not change their folds).
    StartOutcome run_from(Partition part, std::uint64_t fold_seed) const {
        StartOutcome out;
        out.initial_labels = part.labels;
        std::vector<SubgroupState> states(static_cast<std::size_t>(cfg_.K));
        double prev_objective = std::numeric_limits<double>::infinity();
        // Recent partition fingerprints; revisiting one means the alternation
        // has entered a cycle (CV fold draws are membership-determined, so a
        // revisited partition reproduces itself).
        std::vector<std::uint64_t> history;

        int outer = 0;
        for (; outer < cfg_.max_outer_iter; ++outer) {
            update_subgroups(part, states, fold_seed);
            out.trajectory.push_back(objective_of(part, states));

            Partition next = assign(states, &out.repair_used);
            const double obj = objective_of(next, states);
            out.trajectory.push_back(obj);

            const bool same = (next.labels == part.labels);
            const std::uint64_t print = detail::fnv1a64(
                next.labels.data(), next.labels.size() * sizeof(int));
            const bool revisited =
                std::find(history.begin(), history.end(), print) !=
                history.end();
            history.push_back(print);
            if (history.size() > 8) history.erase(history.begin());

            part = std::move(next);
            if (std::abs(obj - prev_objective) < cfg_.outer_tol || same ||
                revisited) {
                prev_objective = obj;
                out.converged = true;
                ++outer;
                break;
            }
            prev_objective = obj;
        }
        out.iterations = outer;
        out.objective = prev_objective;
        out.partition = std::move(part);
        out.models.reserve(states.size());
        for (const auto& s : states) out.models.push_back(to_original(s));
        return out;
    }

    /// R independent starts; the lowest final objective wins (ties by start
    /// index). Starts run concurrently; results are deterministic for a
    /// given seed regardless of thread count.
    FitResult fit() const {
        const int R = cfg_.starts;
        std::vector<StartOutcome> outcomes(static_cast<std::size_t>(R));
        std::vector<std::uint64_t> seeds(static_cast<std::size_t>(R));
        std::vector<std::string> failures(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            seeds[static_cast<std::size_t>(r)] =
                derive_seed(cfg_.seed, 0x5741u, static_cast<std::uint64_t>(r));
        }
        parallel_for(static_cast<std::size_t>(R), cfg_.threads,
                     [&](std::size_t r) {
                         try {
                             outcomes[r] = run_single_start(seeds[r]);
                         } catch (const std::exception& e) {
                             failures[r] = e.what();
                         }
                     });

        int best = -1;
        for (int r = 0; r < R; ++r) {
            if (!failures[static_cast<std::size_t>(r)].empty()) continue;
            if (best < 0 || outcomes[static_cast<std::size_t>(r)].objective <
                                outcomes[static_cast<std::size_t>(best)].objective) {
                best = r;
            }
        }
        if (best < 0) {
            std::string all = "fit: every start failed:";
            for (int r = 0; r < R; ++r) {
                all += "\n  start " + std::to_string(r + 1) + ": " +
                       failures[static_cast<std::size_t>(r)];
            }
            throw numerical_error(all, 0);
        }

        FitResult res;
        auto& win = outcomes[static_cast<std::size_t>(best)];
        res.partition = std::move(win.partition);
        res.models = std::move(win.models);
        res.objective = win.objective;
        res.config = cfg_;
        res.standardization = st_;
        res.starts.reserve(static_cast<std::size_t>(R));
        for (int r = 0; r < R; ++r) {
            const auto& o = outcomes[static_cast<std::size_t>(r)];
            StartRecord rec;
            rec.start_index = r;
            rec.stream_seed = seeds[static_cast<std::size_t>(r)];
            rec.initial_labels = o.initial_labels;
            rec.iterations = o.iterations;
            rec.objective = o.objective;
            rec.converged = o.converged;
            rec.repair_used = o.repair_used;
            res.starts.push_back(std::move(rec));
        }
        return res;
    }

    /// One spec-level update step from scratch (fresh per-subgroup state).
    std::vector<SubgroupModel> update_step_once(const Partition& part,
                                                std::uint64_t fold_seed) const {
        std::vector<SubgroupState> states(static_cast<std::size_t>(cfg_.K));
        update_subgroups(part, states, fold_seed);
        std::vector<SubgroupModel> models;
        models.reserve(states.size());
        for (const auto& s : states) models.push_back(to_original(s));
        return models;
    }

private:
    struct SubgroupState {
        Vector v;  // expanded coefficients, working scale
        double intercept = 0.0;
        double lambda = 0.0;
        double gamma = 0.5;
        double delta = 1.0;
        double step = 1.0;  // carried line-search step
        bool has_model = false;
        bool has_tuning = false;
    };

    void update_subgroups(const Partition& part,
                          std::vector<SubgroupState>& states,
                          std::uint64_t fold_seed) const {
        for (int k = 0; k < cfg_.K; ++k) {
            auto& st = states[static_cast<std::size_t>(k)];
            const auto rows = part.members(k);
            if (rows.empty()) {
                throw invalid_config_error(
                    "update_step: empty subgroup " + std::to_string(k + 1));
            }
            Matrix Xsub(static_cast<Eigen::Index>(rows.size()), Xtil_.cols());
            Vector ysub(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Xsub.row(static_cast<Eigen::Index>(i)) = Xtil_.row(rows[i]);
                ysub[static_cast<Eigen::Index>(i)] = data_.y()[rows[i]];
            }

            st.delta = subgroup_delta(st, Xsub, ysub);

            double lam, gm;
            if (cfg_.fixed_tuning) {
                lam = cfg_.fixed_tuning->lambda;
                gm = cfg_.fixed_tuning->gamma;
            } else if (static_cast<int>(rows.size()) <
                       2 * tuning_grid_.folds) {
                // Too small for CV: reuse the previous pair; on the first
                // update take a mid-path default.
                if (st.has_tuning) {
                    lam = st.lambda;
                    gm = st.gamma;
                } else {
                    gm = 0.5;
                    lam = 0.1 * lambda_max(Xsub, ysub, gm, st.delta, cs_,
                                           cfg_.intercept);
                }
            } else {
                // Fold of a member = rank of its per-sample hash, dealt
                // round-robin: a uniformly random balanced split that is
                // stable under small membership changes and independent of
                // subgroup labels.
                std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
                ranked.reserve(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    ranked.emplace_back(
                        derive_seed(fold_seed, 0xF01Du,
                                    static_cast<std::uint64_t>(rows[i]) + 1),
                        i);
                }
                std::sort(ranked.begin(), ranked.end());
                std::vector<int> folds(rows.size());
                for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
                    folds[ranked[pos].second] = static_cast<int>(
                        pos % static_cast<std::size_t>(tuning_grid_.folds));
                }
                Rng unused_rng(0);
                SolverOptions cv_opts;
                cv_opts.tol = cfg_.cv_solver_tol;
                cv_opts.max_iter = cfg_.cv_solver_max_iter;
                cv_opts.intercept = cfg_.intercept;
                auto sel = cv_select_expanded(Xsub, ysub, cs_, st.delta,
                                              tuning_grid_, unused_rng,
                                              cv_opts, cfg_.threads, nullptr,
                                              &folds);
                lam = sel.lambda;
                gm = sel.gamma;
            }

            SolverOptions opts;
            opts.tol = cfg_.solver_tol;
            opts.max_iter = cfg_.solver_max_iter;
            opts.intercept = cfg_.intercept;
            if (st.has_model) {
                opts.warm_v = st.v;
                opts.warm_intercept = st.intercept;
                opts.initial_step = st.step;
            }
            auto sol = fit_penalized(Xsub, ysub, lam, gm, st.delta, cs_, opts);
            st.v = std::move(sol.expanded_v);
            st.intercept = sol.intercept.value_or(0.0);
            st.step = sol.final_step;
            st.lambda = lam;
            st.gamma = gm;
            st.has_model = true;
            st.has_tuning = true;
        }
    }

    /// Threshold schedule: fixed when configured (squared loss pins the huge
    /// surrogate); otherwise refreshed from the subgroup's residuals under
    /// its previous model, or about the subgroup's median response on the
    /// first update.
    double subgroup_delta(const SubgroupState& st, const Matrix& Xsub,
                          const Vector& ysub) const {
        if (cfg_.loss == Loss::squared) return squared_surrogate_delta_;
        if (cfg_.fixed_delta) return *cfg_.fixed_delta;
        Vector r;
        if (st.has_model) {
            r = ysub - Xsub * st.v;
            if (cfg_.intercept) r.array() -= st.intercept;
        } else {
            r = ysub.array() - median_of(ysub);
        }
        HuberSpec spec;
        spec.delta_floor = delta_floor_;
        return compute_delta(r, spec);
    }

    /// Eq.-style objective in the working scale: per-subgroup Huber loss at
    /// that subgroup's delta plus its penalty at its own tuning pair.
    double objective_of(const Partition& part,
                        const std::vector<SubgroupState>& states) const {
        double total = 0.0;
        for (int k = 0; k < cfg_.K; ++k) {
            const auto& st = states[static_cast<std::size_t>(k)];
            total += detail::penalty_value(st.v, st.lambda, st.gamma, cs_);
        }
        for (Eigen::Index i = 0; i < data_.n(); ++i) {
            const int k = part.labels[static_cast<std::size_t>(i)];
            const auto& st = states[static_cast<std::size_t>(k)];
            const double pred = Xtil_.row(i).dot(st.v) + st.intercept;
            total += huber_value(data_.y()[i] - pred, st.delta);
        }
        return total;
    }

    Partition assign(const std::vector<SubgroupState>& states,
                     bool* repair_used) const {
        const Eigen::Index n = data_.n();
        Matrix losses(n, cfg_.K);
        for (int k = 0; k < cfg_.K; ++k) {
            const auto& st = states[static_cast<std::size_t>(k)];
            Vector pred = Xtil_ * st.v;
            for (Eigen::Index i = 0; i < n; ++i) {
                losses(i, k) = huber_value(
                    data_.y()[i] - pred[i] - st.intercept, st.delta);
            }
        }
        std::vector<int> labels(static_cast<std::size_t>(n), 0);
        std::vector<int> count(static_cast<std::size_t>(cfg_.K), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            for (int k = 1; k < cfg_.K; ++k) {
                if (losses(i, k) < losses(i, best)) best = k;
            }
            labels[static_cast<std::size_t>(i)] = best;
            ++count[static_cast<std::size_t>(best)];
        }
        for (int k = 0; k < cfg_.K; ++k) {
            if (count[static_cast<std::size_t>(k)] > 0) continue;
            if (repair_used) *repair_used = true;
            Eigen::Index worst = -1;
            double worst_loss = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int g = labels[static_cast<std::size_t>(i)];
                if (count[static_cast<std::size_t>(g)] <= 1) continue;
                if (losses(i, g) > worst_loss) {
                    worst_loss = losses(i, g);
                    worst = i;
                }
            }
            if (worst >= 0) {
                --count[static_cast<std::size_t>(
                    labels[static_cast<std::size_t>(worst)])];
                labels[static_cast<std::size_t>(worst)] = k;
                ++count[static_cast<std::size_t>(k)];
            }
        }
        return Partition(std::move(labels), cfg_.K);
    }

    SubgroupModel to_original(const SubgroupState& st) const {
        SubgroupModel m;
        m.lambda = st.lambda;
        m.gamma = st.gamma;
        m.delta = st.delta;
        Vector v_orig = st.v;
        if (v_orig.size() == 0) v_orig = Vector::Zero(cs_.expanded_dim());
        for (Eigen::Index c = 0; c < v_orig.size(); ++c) {
            v_orig[c] /= st_.scale[cs_.original_column(c)];
        }
        m.beta = recombine(v_orig, cs_);
        m.expanded_v = std::move(v_orig);
        if (cfg_.intercept) {
            m.intercept = st.intercept - st_.center.dot(m.beta);
        }
        return m;
    }

    const Dataset& data_;
    EngineConfig cfg_;
    ClusterStructure cs_;
    Standardization st_;
    Matrix Xtil_;
    TuningGrid tuning_grid_;
    double delta_floor_ = 1e-6;
    double squared_surrogate_delta_ = 1e12;
};

/// Recompute the engine objective from original-scale models: Huber loss on
/// the raw data plus the penalty evaluated at the working-scale latent
/// decomposition (rebuilt through the stored standardization).
inline double objective_value(const Dataset& data, const ClusterStructure& cs,
                              const Partition& part,
                              const std::vector<SubgroupModel>& models,
                              const Standardization& st) {
    if (part.n() != data.n()) {
        throw invalid_input_error("objective_value: partition size mismatch");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& m = models[k];
        if (!m.expanded_v) {
            throw invalid_input_error(
                "objective_value: model lacks expanded coefficients");
        }
        Vector vw = *m.expanded_v;
        for (Eigen::Index c = 0; c < vw.size(); ++c) {
            vw[c] *= st.scale[cs.original_column(c)];
        }
        total += detail::penalty_value(vw, m.lambda, m.gamma, cs);
    }
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const auto& m =
            models[static_cast<std::size_t>(part.labels[static_cast<std::size_t>(i)])];
        const double r = data.y()[i] - m.predict(data.X().row(i));
        total += huber_value(r, m.delta);
    }
    return total;
}

/// Spec-level single update step on fresh state.
inline std::vector<SubgroupModel> update_step(const Dataset& data,
                                              const Partition& part,
                                              const EngineConfig& cfg,
                                              const ClusterStructure& cs) {
    Engine engine(data, cfg, cs);
    return engine.update_step_once(part, derive_seed(cfg.seed, 0x5741u, 0));
}

}  // namespace hetreg
