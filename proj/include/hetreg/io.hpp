#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include <algorithm>

#include "hetreg/engine.hpp"
#include "hetreg/simulate.hpp"
#include "hetreg/types.hpp"

namespace hetreg {

using json = nlohmann::ordered_json;

/// Tabular dataset as read from CSV: the response, the design, preserved
/// feature names, and sample ids (the optional `id` column, else 1..n).
struct TableData {
    Dataset data;
    std::vector<std::string> ids;
};

namespace detail_io {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto a = s.find_first_not_of(" \t");
        const auto b = s.find_last_not_of(" \t");
        s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    }
    return out;
}

inline double parse_number(const std::string& tok, const std::string& file,
                           std::size_t lineno, const std::string& col) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw invalid_input_error(file + ":" + std::to_string(lineno) +
                                  ": cannot parse '" + tok +
                                  "' in column '" + col + "'");
    }
}

}  // namespace detail_io

/// Header-checked CSV ingestion. Column `y` is the response; an optional
/// `id` column is carried through; every other column is a numeric feature,
/// order preserved. Parse failures report the offending line.
inline TableData read_data_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) {
        throw invalid_input_error(path + ":1: empty file (header expected)");
    }
    const auto header = detail_io::split_csv_line(line);
    int y_col = -1, id_col = -1;
    std::vector<int> feat_cols;
    std::vector<std::string> feat_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "y") {
            if (y_col >= 0) {
                throw invalid_input_error(path + ":1: duplicate 'y' column");
            }
            y_col = static_cast<int>(c);
        } else if (header[c] == "id") {
            id_col = static_cast<int>(c);
        } else {
            feat_cols.push_back(static_cast<int>(c));
            feat_names.push_back(header[c]);
        }
    }
    if (y_col < 0) {
        throw invalid_input_error(path + ":1: missing required column 'y'");
    }
    if (feat_cols.empty()) {
        throw invalid_input_error(path + ":1: no feature columns");
    }

    std::vector<double> ys;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto toks = detail_io::split_csv_line(line);
        if (toks.size() != header.size()) {
            throw invalid_input_error(
                path + ":" + std::to_string(lineno) + ": expected " +
                std::to_string(header.size()) + " fields, got " +
                std::to_string(toks.size()));
        }
        ys.push_back(detail_io::parse_number(
            toks[static_cast<std::size_t>(y_col)], path, lineno, "y"));
        std::vector<double> row;
        row.reserve(feat_cols.size());
        for (std::size_t f = 0; f < feat_cols.size(); ++f) {
            row.push_back(detail_io::parse_number(
                toks[static_cast<std::size_t>(feat_cols[f])], path, lineno,
                feat_names[f]));
        }
        rows.push_back(std::move(row));
        ids.push_back(id_col >= 0 ? toks[static_cast<std::size_t>(id_col)]
                                  : std::to_string(lineno - 1));
    }
    if (rows.empty()) {
        throw invalid_input_error(path + ": no data rows");
    }
    Matrix X(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(feat_cols.size()));
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        y[static_cast<Eigen::Index>(i)] = ys[i];
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j];
        }
    }
    return TableData{Dataset(std::move(y), std::move(X), feat_names),
                     std::move(ids)};
}

/// Cluster file: one cluster per line, `name: j1,j2,...` with 1-based
/// feature indices. Out-of-range indices report the offending line.
inline ClusterStructure read_clusters(const std::string& path,
                                      Eigen::Index p,
                                      std::vector<std::string>* names =
                                          nullptr) {
    std::ifstream in(path);
    if (!in) throw invalid_input_error(path + ": cannot open");
    std::vector<std::vector<int>> clusters;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) {
            throw invalid_input_error(path + ":" + std::to_string(lineno) +
                                      ": expected 'name: j1,j2,...'");
        }
        std::string name = line.substr(0, colon);
        std::vector<int> members;
        std::stringstream ss(line.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            const auto a = tok.find_first_not_of(" \t\r");
            if (a == std::string::npos) continue;
            const auto b = tok.find_last_not_of(" \t\r");
            tok = tok.substr(a, b - a + 1);
            int j = 0;
            try {
                std::size_t used = 0;
                j = std::stoi(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw invalid_input_error(path + ":" + std::to_string(lineno) +
                                          ": bad feature index '" + tok + "'");
            }
            if (j < 1 || j > p) {
                throw invalid_input_error(
                    path + ":" + std::to_string(lineno) + ": feature index " +
                    std::to_string(j) + " outside 1.." + std::to_string(p));
            }
            members.push_back(j - 1);
        }
        if (members.empty()) {
            throw invalid_input_error(path + ":" + std::to_string(lineno) +
                                      ": empty cluster");
        }
        clusters.push_back(std::move(members));
        if (names) names->push_back(std::move(name));
    }
    if (clusters.empty()) {
        throw invalid_input_error(path + ": no clusters");
    }
    return ClusterStructure(p, std::move(clusters));
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw invalid_input_error(path + ": cannot write");
    out << body;
    if (!out) throw invalid_input_error(path + ": write failed");
}

inline std::string format_full(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

inline void write_data_csv(const std::string& path, const Dataset& data) {
    std::ostringstream out;
    out << "y";
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        if (data.feature_names().empty()) {
            out << ",x" << (j + 1);
        } else {
            out << "," << data.feature_names()[static_cast<std::size_t>(j)];
        }
    }
    out << "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << format_full(data.y()[i]);
        for (Eigen::Index j = 0; j < data.p(); ++j) {
            out << "," << format_full(data.X()(i, j));
        }
        out << "\n";
    }
    write_text(path, out.str());
}

inline void write_clusters_txt(const std::string& path,
                               const ClusterStructure& cs) {
    std::ostringstream out;
    for (Eigen::Index l = 0; l < cs.num_clusters(); ++l) {
        out << "C" << (l + 1) << ":";
        const auto& c = cs.cluster(l);
        for (std::size_t i = 0; i < c.size(); ++i) {
            out << (i == 0 ? " " : ",") << (c[i] + 1);
        }
        out << "\n";
    }
    write_text(path, out.str());
}

/// Labels file: 1-based subgroup per sample id, in row order.
inline void write_labels_csv(const std::string& path,
                             const std::vector<std::string>& ids,
                             const Partition& part) {
    std::ostringstream out;
    out << "sample_id,subgroup\n";
    for (std::size_t i = 0; i < part.labels.size(); ++i) {
        out << (i < ids.size() ? ids[i] : std::to_string(i + 1)) << ","
            << (part.labels[i] + 1) << "\n";
    }
    write_text(path, out.str());
}

inline std::pair<std::vector<std::string>, std::vector<int>> read_labels_csv(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) {
        throw invalid_input_error(path + ":1: empty labels file");
    }
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto toks = detail_io::split_csv_line(line);
        if (toks.size() != 2) {
            throw invalid_input_error(path + ":" + std::to_string(lineno) +
                                      ": expected 'sample_id,subgroup'");
        }
        ids.push_back(toks[0]);
        labels.push_back(static_cast<int>(detail_io::parse_number(
                             toks[1], path, lineno, "subgroup")) -
                         1);
    }
    if (labels.empty()) {
        throw invalid_input_error(path + ": no labels");
    }
    return {std::move(ids), std::move(labels)};
}

namespace detail_io {

inline json sparse_vector(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) {
            arr.push_back(json::array({i + 1, v[i]}));
        }
    }
    return arr;
}

inline Vector dense_from_sparse(const json& arr, Eigen::Index size,
                                const std::string& what) {
    Vector v = Vector::Zero(size);
    for (const auto& pair : arr) {
        const Eigen::Index idx = pair.at(0).get<Eigen::Index>();
        if (idx < 1 || idx > size) {
            throw invalid_input_error(what + ": index out of range");
        }
        v[idx - 1] = pair.at(1).get<double>();
    }
    return v;
}

}  // namespace detail_io

inline const char* loss_name(Loss l) {
    return l == Loss::huber ? "huber" : "squared";
}

inline const char* structure_name(Structure s) {
    return s == Structure::overlapping_clusters ? "clusters" : "lasso";
}

inline json fit_to_json(const FitResult& fit, Eigen::Index p,
                        const std::vector<std::string>& feature_names) {
    json j;
    j["k"] = fit.models.size();
    j["p"] = p;
    j["objective"] = fit.objective;
    j["loss"] = loss_name(fit.config.loss);
    j["structure"] = structure_name(fit.config.structure);
    j["intercept"] = fit.config.intercept;
    j["standardize"] = fit.config.standardize;
    j["seed"] = fit.config.seed;
    j["starts"] = fit.config.starts;
    if (!feature_names.empty()) j["feature_names"] = feature_names;
    json subs = json::array();
    for (const auto& m : fit.models) {
        json s;
        s["lambda"] = m.lambda;
        s["gamma"] = m.gamma;
        s["delta"] = m.delta;
        if (m.intercept) s["intercept"] = *m.intercept;
        s["coefficients"] = detail_io::sparse_vector(m.beta);
        if (m.expanded_v) {
            s["expanded_v"] = detail_io::sparse_vector(*m.expanded_v);
        }
        subs.push_back(std::move(s));
    }
    j["subgroups"] = std::move(subs);
    json st;
    st["enabled"] = fit.standardization.enabled;
    if (fit.standardization.enabled) {
        st["center"] = std::vector<double>(
            fit.standardization.center.data(),
            fit.standardization.center.data() + fit.standardization.center.size());
        st["scale"] = std::vector<double>(
            fit.standardization.scale.data(),
            fit.standardization.scale.data() + fit.standardization.scale.size());
    }
    j["standardization"] = std::move(st);
    json starts = json::array();
    for (const auto& rec : fit.starts) {
        json r;
        r["start"] = rec.start_index + 1;
        r["seed"] = rec.stream_seed;
        r["iterations"] = rec.iterations;
        r["objective"] = rec.objective;
        r["converged"] = rec.converged;
        r["repair_used"] = rec.repair_used;
        starts.push_back(std::move(r));
    }
    j["start_records"] = std::move(starts);
    return j;
}

/// Everything cmd_predict / cmd_evaluate need from a stored fit.
struct StoredFit {
    Eigen::Index p = 0;
    std::vector<SubgroupModel> models;
    Standardization standardization;
    double objective = 0.0;
};

inline StoredFit fit_from_json(const json& j) {
    StoredFit out;
    out.p = j.at("p").get<Eigen::Index>();
    out.objective = j.value("objective", 0.0);
    for (const auto& s : j.at("subgroups")) {
        SubgroupModel m;
        m.lambda = s.at("lambda").get<double>();
        m.gamma = s.at("gamma").get<double>();
        m.delta = s.at("delta").get<double>();
        if (s.contains("intercept")) m.intercept = s.at("intercept").get<double>();
        m.beta = detail_io::dense_from_sparse(s.at("coefficients"), out.p,
                                              "coefficients");
        if (s.contains("expanded_v")) {
            // Expanded length is unknown without the structure; keep the raw
            // sparse form for consumers that rebuild it.
            json arr = s.at("expanded_v");
            Eigen::Index maxidx = 0;
            for (const auto& pr : arr) {
                maxidx = std::max(maxidx, pr.at(0).get<Eigen::Index>());
            }
            m.expanded_v =
                detail_io::dense_from_sparse(arr, maxidx, "expanded_v");
        }
        out.models.push_back(std::move(m));
    }
    const auto& st = j.at("standardization");
    out.standardization.enabled = st.at("enabled").get<bool>();
    if (out.standardization.enabled) {
        const auto center = st.at("center").get<std::vector<double>>();
        const auto scale = st.at("scale").get<std::vector<double>>();
        out.standardization.center =
            Eigen::Map<const Vector>(center.data(),
                                     static_cast<Eigen::Index>(center.size()));
        out.standardization.scale =
            Eigen::Map<const Vector>(scale.data(),
                                     static_cast<Eigen::Index>(scale.size()));
    } else {
        out.standardization.center = Vector::Zero(out.p);
        out.standardization.scale = Vector::Ones(out.p);
    }
    return out;
}

inline json truth_to_json(const GroundTruth& truth) {
    json j;
    j["k"] = truth.K();
    json labels = json::array();
    for (int g : truth.partition.labels) labels.push_back(g + 1);
    j["labels"] = std::move(labels);
    json betas = json::array();
    for (Eigen::Index k = 0; k < truth.betas.rows(); ++k) {
        json row = json::array();
        for (Eigen::Index jx = 0; jx < truth.betas.cols(); ++jx) {
            row.push_back(truth.betas(k, jx));
        }
        betas.push_back(std::move(row));
    }
    j["betas"] = std::move(betas);
    return j;
}

inline GroundTruth truth_from_json(const json& j) {
    GroundTruth out;
    const int K = j.at("k").get<int>();
    std::vector<int> labels;
    for (const auto& g : j.at("labels")) labels.push_back(g.get<int>() - 1);
    out.partition = Partition(std::move(labels), K);
    const auto& rows = j.at("betas");
    const Eigen::Index p =
        static_cast<Eigen::Index>(rows.at(0).size());
    out.betas.resize(K, p);
    for (int k = 0; k < K; ++k) {
        for (Eigen::Index c = 0; c < p; ++c) {
            out.betas(k, c) =
                rows.at(static_cast<std::size_t>(k)).at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    return out;
}

inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "missing";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    std::ostringstream ss;
    ss << "fnv1a:" << std::hex << h;
    return ss.str();
}

}  // namespace hetreg
