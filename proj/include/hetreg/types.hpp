#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetreg/errors.hpp"
#include "hetreg/huber.hpp"

namespace hetreg {

/// Response vector plus dense design matrix. Immutable after construction.
class Dataset {
public:
    Dataset(Vector y, Matrix X, std::vector<std::string> feature_names = {})
        : y_(std::move(y)), X_(std::move(X)),
          feature_names_(std::move(feature_names)) {
        if (y_.size() < 1 || X_.cols() < 1) {
            throw invalid_input_error("Dataset: need n >= 1 and p >= 1");
        }
        if (X_.rows() != y_.size()) {
            throw invalid_input_error("Dataset: X row count != length of y");
        }
        if (!y_.allFinite() || !X_.allFinite()) {
            throw invalid_input_error("Dataset: non-finite entry");
        }
        if (!feature_names_.empty() &&
            feature_names_.size() != static_cast<std::size_t>(X_.cols())) {
            throw invalid_input_error("Dataset: feature_names length != p");
        }
    }

    Eigen::Index n() const { return y_.size(); }
    Eigen::Index p() const { return X_.cols(); }
    const Vector& y() const { return y_; }
    const Matrix& X() const { return X_; }
    const std::vector<std::string>& feature_names() const {
        return feature_names_;
    }

private:
    Vector y_;
    Matrix X_;
    std::vector<std::string> feature_names_;
};

/// L possibly-overlapping feature clusters over columns 0..p-1, with the
/// duplication map into the expanded space of dimension P = sum_l p_l.
/// Block l occupies the contiguous expanded range
/// [block_begin(l), block_begin(l) + size(l)), listing the members of
/// cluster l in ascending column order. Features not covered by any given
/// cluster are wrapped in singleton clusters appended at the end, so every
/// column always belongs to at least one cluster.
class ClusterStructure {
public:
    /// clusters: 0-based column index sets; duplicates within a set are
    /// removed, each set is sorted.
    ClusterStructure(Eigen::Index p, std::vector<std::vector<int>> clusters)
        : p_(p) {
        if (p < 1) {
            throw invalid_structure_error("ClusterStructure: p must be >= 1");
        }
        std::vector<char> covered(static_cast<std::size_t>(p), 0);
        for (auto& c : clusters) {
            std::sort(c.begin(), c.end());
            c.erase(std::unique(c.begin(), c.end()), c.end());
            if (c.empty()) {
                throw invalid_structure_error(
                    "ClusterStructure: empty cluster");
            }
            if (c.front() < 0 || c.back() >= p) {
                throw invalid_structure_error(
                    "ClusterStructure: feature index out of range");
            }
            for (int j : c) covered[static_cast<std::size_t>(j)] = 1;
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!covered[static_cast<std::size_t>(j)]) {
                clusters.push_back({static_cast<int>(j)});
            }
        }
        clusters_ = std::move(clusters);
        block_begin_.reserve(clusters_.size());
        weights_.reserve(clusters_.size());
        Eigen::Index offset = 0;
        for (const auto& c : clusters_) {
            block_begin_.push_back(offset);
            weights_.push_back(std::sqrt(static_cast<double>(c.size())));
            for (int j : c) {
                dup_block_.push_back(static_cast<int>(block_begin_.size()) - 1);
                dup_column_.push_back(j);
            }
            offset += static_cast<Eigen::Index>(c.size());
        }
        expanded_dim_ = offset;
    }

    /// The unstructured case: one singleton cluster per feature.
    static ClusterStructure singletons(Eigen::Index p) {
        std::vector<std::vector<int>> c(static_cast<std::size_t>(p));
        for (Eigen::Index j = 0; j < p; ++j) {
            c[static_cast<std::size_t>(j)] = {static_cast<int>(j)};
        }
        return ClusterStructure(p, std::move(c));
    }

    Eigen::Index p() const { return p_; }
    Eigen::Index num_clusters() const {
        return static_cast<Eigen::Index>(clusters_.size());
    }
    Eigen::Index expanded_dim() const { return expanded_dim_; }

    const std::vector<int>& cluster(Eigen::Index l) const {
        return clusters_[static_cast<std::size_t>(l)];
    }
    Eigen::Index size(Eigen::Index l) const {
        return static_cast<Eigen::Index>(
            clusters_[static_cast<std::size_t>(l)].size());
    }
    /// omega_l = sqrt(p_l)
    double weight(Eigen::Index l) const {
        return weights_[static_cast<std::size_t>(l)];
    }
    Eigen::Index block_begin(Eigen::Index l) const {
        return block_begin_[static_cast<std::size_t>(l)];
    }
    /// Cluster owning expanded coordinate k.
    int block_of(Eigen::Index k) const {
        return dup_block_[static_cast<std::size_t>(k)];
    }
    /// Original column duplicated at expanded coordinate k.
    int original_column(Eigen::Index k) const {
        return dup_column_[static_cast<std::size_t>(k)];
    }

    bool all_singletons() const {
        for (const auto& c : clusters_) {
            if (c.size() != 1) return false;
        }
        return true;
    }

private:
    Eigen::Index p_ = 0;
    Eigen::Index expanded_dim_ = 0;
    std::vector<std::vector<int>> clusters_;
    std::vector<Eigen::Index> block_begin_;
    std::vector<double> weights_;
    std::vector<int> dup_block_;
    std::vector<int> dup_column_;
};

/// Subgroup labels, 0-based: labels[i] in {0, ..., K-1}.
struct Partition {
    std::vector<int> labels;
    int K = 1;

    Partition() = default;
    Partition(std::vector<int> l, int k) : labels(std::move(l)), K(k) {
        if (K < 1) throw invalid_input_error("Partition: K must be >= 1");
        for (int g : labels) {
            if (g < 0 || g >= K) {
                throw invalid_input_error("Partition: label out of range");
            }
        }
    }

    Eigen::Index n() const { return static_cast<Eigen::Index>(labels.size()); }

    std::vector<Eigen::Index> members(int k) const {
        std::vector<Eigen::Index> m;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == k) m.push_back(static_cast<Eigen::Index>(i));
        }
        return m;
    }

    std::vector<Eigen::Index> sizes() const {
        std::vector<Eigen::Index> s(static_cast<std::size_t>(K), 0);
        for (int g : labels) ++s[static_cast<std::size_t>(g)];
        return s;
    }
};

/// Fitted coefficients for one subgroup, in the original column scale,
/// plus the tuning state that produced them. expanded_v is the latent
/// decomposition in the duplicated space; recombining it reproduces beta.
struct SubgroupModel {
    Vector beta;
    std::optional<double> intercept;
    double lambda = 0.0;
    double gamma = 0.0;
    double delta = 1.0;
    std::optional<Vector> expanded_v;

    double predict(const Eigen::Ref<const Vector>& x) const {
        return x.dot(beta) + intercept.value_or(0.0);
    }
};

}  // namespace hetreg
