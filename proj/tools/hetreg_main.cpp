// Command-line driver: simulate benchmark data, fit the heterogeneous
// regression model, select K by BIC, evaluate against a ground truth or a
// second fit, and predict held-out samples.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetreg/hetreg.hpp"

namespace fs = std::filesystem;
using namespace hetreg;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonFitArgs {
    std::string data_path;
    std::string clusters_path;
    int k = 0;
    int k_min = 0;
    int k_max = 0;
    int starts = 20;
    std::string loss = "huber";
    std::string structure = "clusters";
    std::uint64_t seed = 0;
    double tol = 1e-3;
    bool standardize = true;
    bool intercept = true;
    std::string out_dir;
    int threads = 0;
    int max_outer = 100;
    // Optional fixed tuning (CV-in-loop when unset).
    double fixed_lambda = -1.0;
    double fixed_gamma = -1.0;
    double fixed_delta = -1.0;
    // CV grid overrides.
    std::vector<double> cv_gammas;
    int cv_lambdas = 20;
    int folds = 5;
};

void add_fit_options(CLI::App* cmd, CommonFitArgs& a, bool with_k) {
    cmd->add_option("--data", a.data_path, "input CSV (column 'y' + features)")
        ->required();
    cmd->add_option("--clusters", a.clusters_path,
                    "cluster file 'name: j1,j2,...' (default: singletons)");
    if (with_k) cmd->add_option("--k", a.k, "number of subgroups");
    cmd->add_option("--k-min", a.k_min, "smallest K to try");
    cmd->add_option("--k-max", a.k_max, "largest K to try");
    cmd->add_option("--starts", a.starts, "random starting partitions")->capture_default_str();
    cmd->add_option("--loss", a.loss, "huber|squared")->capture_default_str()
        ->check(CLI::IsMember({"huber", "squared"}));
    cmd->add_option("--structure", a.structure, "clusters|lasso")->capture_default_str()
        ->check(CLI::IsMember({"clusters", "lasso"}));
    cmd->add_option("--seed", a.seed, "master seed")->capture_default_str();
    cmd->add_option("--tol", a.tol, "outer convergence tolerance")->capture_default_str();
    cmd->add_option("--standardize", a.standardize,
                    "standardize columns before fitting")->capture_default_str();
    cmd->add_option("--intercept", a.intercept,
                    "include subgroup intercepts")->capture_default_str();
    cmd->add_option("--out", a.out_dir, "output directory")->required();
    cmd->add_option("--threads", a.threads,
                    "worker threads (0 = hardware)")->capture_default_str()
        ->envname("HETREG_THREADS");
    cmd->add_option("--max-outer", a.max_outer,
                    "cap on update/assignment sweeps")->capture_default_str();
    cmd->add_option("--lambda", a.fixed_lambda,
                    "fixed penalty level (skips CV; needs --gamma)");
    cmd->add_option("--gamma", a.fixed_gamma,
                    "fixed sparsity mix in [0,1] (skips CV; needs --lambda)");
    cmd->add_option("--delta", a.fixed_delta,
                    "fixed Huber threshold (default: refreshed from residuals)");
    cmd->add_option("--cv-gammas", a.cv_gammas, "CV gamma grid");
    cmd->add_option("--cv-lambdas", a.cv_lambdas, "CV lambda grid size")->capture_default_str();
    cmd->add_option("--folds", a.folds, "CV folds")->capture_default_str();
}

EngineConfig build_config(const CommonFitArgs& a) {
    EngineConfig cfg;
    cfg.K = a.k > 0 ? a.k : 1;
    cfg.starts = a.starts;
    cfg.outer_tol = a.tol;
    cfg.max_outer_iter = a.max_outer;
    cfg.loss = a.loss == "squared" ? Loss::squared : Loss::huber;
    cfg.structure = a.structure == "lasso" ? Structure::singleton_lasso
                                           : Structure::overlapping_clusters;
    cfg.seed = a.seed;
    cfg.standardize = a.standardize;
    cfg.intercept = a.intercept;
    cfg.threads = a.threads;
    if (a.fixed_lambda >= 0.0 || a.fixed_gamma >= 0.0) {
        if (a.fixed_lambda < 0.0 || a.fixed_gamma < 0.0) {
            throw invalid_config_error(
                "--lambda and --gamma must be given together");
        }
        cfg.fixed_tuning = FixedTuning{a.fixed_lambda, a.fixed_gamma};
    }
    if (a.fixed_delta > 0.0) cfg.fixed_delta = a.fixed_delta;
    if (!a.cv_gammas.empty()) cfg.grid.gammas = a.cv_gammas;
    cfg.grid.n_lambdas = a.cv_lambdas;
    cfg.grid.folds = a.folds;
    return cfg;
}

json config_to_json(const CommonFitArgs& a) {
    json j;
    j["data"] = a.data_path;
    j["clusters"] = a.clusters_path.empty() ? "(singletons)" : a.clusters_path;
    if (a.k > 0) j["k"] = a.k;
    if (a.k_min > 0) j["k_min"] = a.k_min;
    if (a.k_max > 0) j["k_max"] = a.k_max;
    j["starts"] = a.starts;
    j["loss"] = a.loss;
    j["structure"] = a.structure;
    j["seed"] = a.seed;
    j["tol"] = a.tol;
    j["standardize"] = a.standardize;
    j["intercept"] = a.intercept;
    j["max_outer"] = a.max_outer;
    j["cv_lambdas"] = a.cv_lambdas;
    j["folds"] = a.folds;
    if (a.fixed_lambda >= 0) j["lambda"] = a.fixed_lambda;
    if (a.fixed_gamma >= 0) j["gamma"] = a.fixed_gamma;
    if (a.fixed_delta > 0) j["delta"] = a.fixed_delta;
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    std::uint64_t seed, int threads, double wall_s,
                    const std::map<std::string, std::string>& inputs,
                    const json& config) {
    json m;
    m["command"] = command;
    m["version"] = hetreg::version;
    m["seed"] = seed;
    m["threads"] = threads;
    m["wall_time_s"] = wall_s;
    json in;
    for (const auto& [path, digest] : inputs) in[path] = digest;
    m["inputs"] = std::move(in);
    m["config"] = config;
    write_text((dir / "manifest.json").string(), m.dump(2) + "\n");
}

int run_fit_like(const CommonFitArgs& args, const std::string& command) {
    const auto t0 = std::chrono::steady_clock::now();
    auto table = read_data_csv(args.data_path);
    ClusterStructure cs =
        (!args.clusters_path.empty() && args.structure == "clusters")
            ? read_clusters(args.clusters_path, table.data.p())
            : ClusterStructure::singletons(table.data.p());

    EngineConfig cfg = build_config(args);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);

    FitResult fit;
    if (args.k > 0) {
        cfg.K = args.k;
        Engine engine(table.data, cfg, cs);
        fit = engine.fit();
    } else {
        const int kmin = args.k_min > 0 ? args.k_min : 1;
        const int kmax = args.k_max > 0 ? args.k_max : 5;
        auto sel = select_K(table.data, cs, cfg, kmin, kmax);
        std::ostringstream bic_csv;
        bic_csv << "k,bic\n";
        for (const auto& [k, b] : sel.bic_curve) {
            bic_csv << k << "," << format_full(b) << "\n";
        }
        write_text((out / "bic.csv").string(), bic_csv.str());
        fit = std::move(sel.best_fit);
        std::cout << "selected K = " << sel.best_K << "\n";
    }

    write_text((out / "fit.json").string(),
               fit_to_json(fit, table.data.p(),
                           table.data.feature_names()).dump(2) + "\n");
    write_labels_csv((out / "labels.csv").string(), table.ids, fit.partition);

    std::map<std::string, std::string> inputs{
        {args.data_path, file_digest(args.data_path)}};
    if (!args.clusters_path.empty()) {
        inputs[args.clusters_path] = file_digest(args.clusters_path);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(out, command, args.seed, cfg.threads, wall, inputs,
                   config_to_json(args));
    std::cout << "objective " << fit.objective << ", K = "
              << fit.models.size() << ", outputs in " << args.out_dir << "\n";
    return 0;
}

int run_simulate(const std::string& scenario, int n,
                 const std::string& balance, const std::string& error,
                 double noise_scale, std::uint64_t seed,
                 const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    ScenarioSpec spec;
    spec.scenario = scenario_from_name(scenario);
    spec.n = n;
    if (balance == "balanced") spec.balance = Balance::balanced;
    else if (balance == "unbalanced") spec.balance = Balance::unbalanced_7_3;
    else if (balance == "three") spec.balance = Balance::three_equal;
    else throw invalid_input_error("unknown balance: " + balance);
    if (error == "t1") spec.error = ErrorKind::t1;
    else if (error == "mix") spec.error = ErrorKind::mix;
    else if (error == "gauss") spec.error = ErrorKind::gauss;
    else throw invalid_input_error("unknown error: " + error);
    spec.noise_scale = noise_scale;
    spec.seed = seed;

    auto [data, truth] = gen_dataset(spec);
    auto cs = gen_clusters(spec.scenario);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    write_data_csv((out / "data.csv").string(), data);
    write_clusters_txt((out / "clusters.txt").string(), cs);
    write_text((out / "truth.json").string(),
               truth_to_json(truth).dump(2) + "\n");

    json cfgj;
    cfgj["scenario"] = scenario;
    cfgj["n"] = n;
    cfgj["balance"] = balance;
    cfgj["error"] = error;
    cfgj["noise_scale"] = noise_scale;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(out, "simulate", seed, 1, wall, {}, cfgj);
    std::cout << "wrote " << (out / "data.csv").string() << " (" << data.n()
              << " x " << (data.p() + 1) << ")\n";
    return 0;
}

int run_evaluate(const std::string& fit_path, const std::string& labels_path,
                 const std::string& truth_path,
                 const std::string& labels_b_path,
                 const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    json metrics;
    std::map<std::string, std::string> inputs;

    auto [ids_a, labels_a] = read_labels_csv(labels_path);
    inputs[labels_path] = file_digest(labels_path);

    if (!labels_b_path.empty()) {
        auto [ids_b, labels_b] = read_labels_csv(labels_b_path);
        inputs[labels_b_path] = file_digest(labels_b_path);
        // Match B's samples inside A by id.
        std::map<std::string, Eigen::Index> where;
        for (std::size_t i = 0; i < ids_a.size(); ++i) {
            where[ids_a[i]] = static_cast<Eigen::Index>(i);
        }
        std::vector<Eigen::Index> index_map;
        std::vector<int> common_b;
        for (std::size_t i = 0; i < ids_b.size(); ++i) {
            auto hit = where.find(ids_b[i]);
            if (hit == where.end()) continue;
            index_map.push_back(hit->second);
            common_b.push_back(labels_b[i]);
        }
        if (index_map.empty()) {
            throw invalid_input_error("evaluate: no common sample ids");
        }
        int Ka = 1, Kb = 1;
        for (int g : labels_a) Ka = std::max(Ka, g + 1);
        for (int g : common_b) Kb = std::max(Kb, g + 1);
        Partition pa(labels_a, Ka), pb(common_b, Kb);

        std::vector<int> a_common;
        for (Eigen::Index idx : index_map) {
            a_common.push_back(labels_a[static_cast<std::size_t>(idx)]);
        }
        Partition pa_common(a_common, Ka);
        metrics["nmi"] = nmi(pa_common, pb);
        metrics["stability"] = stability(pa, pb, index_map);
        metrics["common_samples"] = index_map.size();
    } else {
        if (fit_path.empty() || truth_path.empty()) {
            throw invalid_input_error(
                "evaluate: need --fit and --truth (or --labels-b)");
        }
        std::ifstream fin(fit_path);
        if (!fin) throw invalid_input_error(fit_path + ": cannot open");
        json fj = json::parse(fin);
        StoredFit stored = fit_from_json(fj);
        inputs[fit_path] = file_digest(fit_path);

        std::ifstream tin(truth_path);
        if (!tin) throw invalid_input_error(truth_path + ": cannot open");
        GroundTruth truth = truth_from_json(json::parse(tin));
        inputs[truth_path] = file_digest(truth_path);

        if (truth.partition.n() != static_cast<Eigen::Index>(labels_a.size())) {
            throw invalid_input_error(
                "evaluate: labels and truth sample counts differ");
        }
        const int Ke = static_cast<int>(stored.models.size());
        Partition est(labels_a, Ke);
        Matrix est_betas(Ke, stored.p);
        for (int k = 0; k < Ke; ++k) {
            est_betas.row(k) = stored.models[static_cast<std::size_t>(k)].beta;
        }
        metrics["ari"] = ari(est, truth.partition);
        auto rep = identification_report(est, est_betas, truth.partition,
                                         truth.betas);
        metrics["tpr"] = rep.tpr;
        metrics["fpr"] = rep.fpr;
        metrics["mcc"] = rep.mcc;
        json perm = json::array();
        for (int t : rep.matched_perm) perm.push_back(t + 1);
        metrics["matched_permutation"] = std::move(perm);
        metrics["rmse"] = rmse(est, est_betas, truth.partition, truth.betas);
    }

    write_text((out / "metrics.json").string(), metrics.dump(2) + "\n");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(out, "evaluate", 0, 1, wall, inputs, json::object());
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

int run_predict(const std::string& fit_path, const std::string& data_path,
                const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    std::ifstream fin(fit_path);
    if (!fin) throw invalid_input_error(fit_path + ": cannot open");
    StoredFit stored = fit_from_json(json::parse(fin));

    auto table = read_data_csv(data_path);  // enforces the presence of y
    if (table.data.p() != stored.p) {
        throw invalid_input_error(
            "predict: test data has " + std::to_string(table.data.p()) +
            " features, fit expects " + std::to_string(stored.p));
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    std::ostringstream csv;
    csv << "sample_id,subgroup,yhat,abs_rel_err\n";
    Vector yhat(table.data.n());
    for (Eigen::Index i = 0; i < table.data.n(); ++i) {
        auto [label, pred] =
            predict(stored.models, table.data.X().row(i), table.data.y()[i]);
        yhat[i] = pred;
        csv << table.ids[static_cast<std::size_t>(i)] << "," << (label + 1)
            << "," << format_full(pred) << ",";
        if (table.data.y()[i] != 0.0) {
            csv << format_full(
                std::abs((table.data.y()[i] - pred) / table.data.y()[i]));
        }
        csv << "\n";
    }
    write_text((out / "predictions.csv").string(), csv.str());

    auto pm = pmre(table.data.y(), yhat);
    json summary;
    summary["pmre"] = pm.value;
    summary["excluded_zero_y"] = pm.excluded_zero_y;
    summary["n_test"] = table.data.n();
    write_text((out / "summary.json").string(), summary.dump(2) + "\n");

    std::map<std::string, std::string> inputs{
        {fit_path, file_digest(fit_path)},
        {data_path, file_digest(data_path)}};
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(out, "predict", 0, 1, wall, inputs, json::object());
    std::cout << "PMRE " << pm.value << " over "
              << (table.data.n() - pm.excluded_zero_y) << " samples\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heterogeneous sparse regression with overlapping feature "
                 "clusters and a robust loss"};
    app.require_subcommand(1);
    app.set_version_flag("--version", hetreg::version);

    CommonFitArgs fit_args;
    auto* fit_cmd = app.add_subcommand(
        "fit", "fit subgroup models (fixed K or BIC over a K range)");
    add_fit_options(fit_cmd, fit_args, true);

    CommonFitArgs selk_args;
    auto* selk_cmd =
        app.add_subcommand("select-k", "choose K by the modified BIC");
    add_fit_options(selk_cmd, selk_args, false);

    std::string sim_scenario = "S1";
    int sim_n = 300;
    std::string sim_balance = "balanced";
    std::string sim_error = "mix";
    double sim_noise = 0.5;
    std::uint64_t sim_seed = 0;
    std::string sim_out;
    auto* sim_cmd =
        app.add_subcommand("simulate", "generate a benchmark dataset");
    sim_cmd->add_option("--scenario", sim_scenario,
                        "S1..S6 | lowdim10|lowdim20|lowdim32|lowdim50")->capture_default_str();
    sim_cmd->add_option("--n", sim_n, "sample count")->capture_default_str();
    sim_cmd->add_option("--balance", sim_balance,
                        "balanced|unbalanced|three")->capture_default_str()
        ->check(CLI::IsMember({"balanced", "unbalanced", "three"}));
    sim_cmd->add_option("--error", sim_error, "t1|mix|gauss")->capture_default_str()
        ->check(CLI::IsMember({"t1", "mix", "gauss"}));
    sim_cmd->add_option("--noise-scale", sim_noise, "error multiplier")->capture_default_str();
    sim_cmd->add_option("--seed", sim_seed, "seed")->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "output directory")->required();

    std::string eval_fit, eval_labels, eval_truth, eval_labels_b, eval_out;
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "score a fit against the truth, or compare two fits");
    eval_cmd->add_option("--fit", eval_fit, "fit.json");
    eval_cmd->add_option("--labels", eval_labels, "labels.csv")->required();
    eval_cmd->add_option("--truth", eval_truth, "truth.json");
    eval_cmd->add_option("--labels-b", eval_labels_b,
                         "second labels.csv (NMI/stability mode)");
    eval_cmd->add_option("--out", eval_out, "output directory")->required();

    std::string pred_fit, pred_data, pred_out;
    auto* pred_cmd =
        app.add_subcommand("predict", "predict subgroups and responses");
    pred_cmd->add_option("--fit", pred_fit, "fit.json")->required();
    pred_cmd->add_option("--data", pred_data,
                         "test CSV (must include column 'y')")
        ->required();
    pred_cmd->add_option("--out", pred_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit_cmd->parsed()) {
            if (fit_args.k <= 0 && fit_args.k_min <= 0 && fit_args.k_max <= 0) {
                std::cerr << "fit: give --k or --k-min/--k-max\n";
                return kExitUsage;
            }
            return run_fit_like(fit_args, "fit");
        }
        if (selk_cmd->parsed()) {
            return run_fit_like(selk_args, "select-k");
        }
        if (sim_cmd->parsed()) {
            return run_simulate(sim_scenario, sim_n, sim_balance, sim_error,
                                sim_noise, sim_seed, sim_out);
        }
        if (eval_cmd->parsed()) {
            return run_evaluate(eval_fit, eval_labels, eval_truth,
                                eval_labels_b, eval_out);
        }
        if (pred_cmd->parsed()) {
            return run_predict(pred_fit, pred_data, pred_out);
        }
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const unsupported_prediction_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
