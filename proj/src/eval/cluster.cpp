#include "pmn/eval/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "pmn/common/error.hpp"
#include "pmn/common/keyvalue.hpp"

namespace pmn::eval {

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionError("cosine distance on vectors of unequal length");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    const double denom = std::max(std::sqrt(nu), 1e-12) * std::max(std::sqrt(nv), 1e-12);
    return 1.0 - std::clamp(dot / denom, -1.0, 1.0);
}

Dendrogram cluster_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) throw ContractError("clustering needs at least two rows");
    for (const auto& r : rows) {
        if (r.size() != rows[0].size()) throw DimensionError("clustering rows of unequal length");
    }
    // Slots 0..n-1 hold leaves; a merge reuses the slot of its lower member.
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = cosine_distance(rows[i], rows[j]);
    }
    std::vector<std::size_t> id(n), size(n, 1);
    std::iota(id.begin(), id.end(), std::size_t{0});
    std::vector<bool> alive(n, true);

    Dendrogram out;
    out.leaf_count = n;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t best_i = 0, best_j = 0;
        std::size_t best_a = std::numeric_limits<std::size_t>::max(), best_b = best_a;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!alive[j]) continue;
                const std::size_t a = std::min(id[i], id[j]), b = std::max(id[i], id[j]);
                const double d = dist[i][j];
                if (d < best || (d == best && std::pair(a, b) < std::pair(best_a, best_b))) {
                    best = d;
                    best_a = a;
                    best_b = b;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        const std::size_t new_id = n + step;
        out.merges.push_back({best_a, best_b, best, new_id});
        const double wi = double(size[best_i]), wj = double(size[best_j]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!alive[k] || k == best_i || k == best_j) continue;
            const double d = (wi * dist[best_i][k] + wj * dist[best_j][k]) / (wi + wj);
            dist[best_i][k] = dist[k][best_i] = d;
        }
        alive[best_j] = false;
        size[best_i] += size[best_j];
        id[best_i] = new_id;
    }
    return out;
}

template <typename T>
Dendrogram cluster_prototypes(const ad::Tensor<T>& prototypes) {
    if (prototypes.rank() != 2) throw DimensionError("prototypes must be a matrix");
    std::vector<std::vector<double>> rows(prototypes.dim(0), std::vector<double>(prototypes.dim(1)));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) rows[i][j] = double(prototypes(i, j));
    }
    return cluster_rows(rows);
}

template Dendrogram cluster_prototypes(const ad::Tensor<float>&);
template Dendrogram cluster_prototypes(const ad::Tensor<double>&);

std::vector<std::size_t> cut_tree(const Dendrogram& dendrogram, std::size_t k) {
    const std::size_t n = dendrogram.leaf_count;
    if (k < 1 || k > n) {
        throw ContractError("cannot cut " + std::to_string(n) + " leaves into " +
                            std::to_string(k) + " clusters");
    }
    std::vector<std::size_t> parent(2 * n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t m = 0; m < n - k; ++m) {
        const auto& merge = dendrogram.merges[m];
        parent[find(merge.a)] = merge.id;
        parent[find(merge.b)] = merge.id;
    }
    std::vector<std::size_t> label(n);
    std::vector<std::size_t> root_label(2 * n, std::numeric_limits<std::size_t>::max());
    std::size_t next = 0;
    for (std::size_t leaf = 0; leaf < n; ++leaf) {
        const std::size_t root = find(leaf);
        if (root_label[root] == std::numeric_limits<std::size_t>::max()) root_label[root] = next++;
        label[leaf] = root_label[root];
    }
    return label;
}

std::size_t cluster_count(const std::vector<std::size_t>& cluster_map) {
    std::vector<std::size_t> sorted = cluster_map;
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

double pair_recovery_score(const std::vector<std::size_t>& cluster_map,
                           const std::vector<std::vector<std::size_t>>& groups) {
    std::size_t pairs = 0, recovered = 0;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            for (std::size_t j = i + 1; j < g.size(); ++j) {
                if (g[i] >= cluster_map.size() || g[j] >= cluster_map.size()) {
                    throw IndexError("group member outside the cluster map");
                }
                ++pairs;
                recovered += cluster_map[g[i]] == cluster_map[g[j]] ? 1 : 0;
            }
        }
    }
    return pairs == 0 ? 1.0 : double(recovered) / double(pairs);
}

void write_dendrogram(std::ostream& out, const Dendrogram& dendrogram) {
    for (const auto& m : dendrogram.merges) {
        out << m.a << '\t' << m.b << '\t' << format_double(m.height) << '\t' << m.id << '\n';
    }
}

void write_cluster_map(std::ostream& out, const std::vector<std::string>& label_names,
                       const std::vector<std::size_t>& cluster_map) {
    for (std::size_t i = 0; i < cluster_map.size(); ++i) {
        out << (i < label_names.size() ? label_names[i] : std::to_string(i)) << '\t'
            << cluster_map[i] << '\n';
    }
}

}  // namespace pmn::eval
