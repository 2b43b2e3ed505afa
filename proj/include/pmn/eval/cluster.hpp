#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pmn/autodiff/tensor.hpp"

namespace pmn::eval {

struct Merge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
    double height = 0.0;
    std::size_t id = 0;  // leaf_count + merge index
    bool operator==(const Merge&) const = default;
};

struct Dendrogram {
    std::size_t leaf_count = 0;
    std::vector<Merge> merges;
};

/// 1 - cosine(u, v) with norms floored at 1e-12.
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Average-linkage agglomerative clustering of the rows of a [n x d] matrix
/// under cosine distance. Among equally close pairs the lowest (a, b) merges.
Dendrogram cluster_rows(const std::vector<std::vector<double>>& rows);

template <typename T>
Dendrogram cluster_prototypes(const ad::Tensor<T>& prototypes);

/// Cluster index per leaf after cutting to k clusters (1 <= k <= leaf_count).
/// Clusters are numbered by their lowest leaf.
std::vector<std::size_t> cut_tree(const Dendrogram& dendrogram, std::size_t k);

std::size_t cluster_count(const std::vector<std::size_t>& cluster_map);

/// Fraction of within-group label pairs that share a cluster; 1 when the
/// groups contain no pairs.
double pair_recovery_score(const std::vector<std::size_t>& cluster_map,
                           const std::vector<std::vector<std::size_t>>& groups);

/// `a<TAB>b<TAB>height<TAB>new_id` lines.
void write_dendrogram(std::ostream& out, const Dendrogram& dendrogram);
/// `label<TAB>cluster` lines.
void write_cluster_map(std::ostream& out, const std::vector<std::string>& label_names,
                       const std::vector<std::size_t>& cluster_map);

}  // namespace pmn::eval
