#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <optional>
#include <utility>
#include <vector>

#include "tvopt/common.hpp"

namespace tvopt {

/// One undirected edge with the fixed lexicographic orientation used for the
/// incidence matrix: the edge leaves the smaller vertex and enters the larger.
struct Edge {
    int u = 0;  // smaller index
    int v = 0;  // larger index
    double weight = 0.0;
};

/// Undirected weighted communication topology. Immutable after construction;
/// safe to share read-only across concurrent simulation runs.
class Topology {
public:
    /// Builds from a weighted adjacency matrix. Requires a square symmetric
    /// matrix with nonnegative entries and a zero diagonal (no self-loops).
    explicit Topology(Eigen::MatrixXd weights) : weights_(std::move(weights)) {
        const Eigen::Index n = weights_.rows();
        if (n == 0 || weights_.cols() != n)
            throw ValidationError("adjacency matrix must be square and non-empty");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (weights_(i, i) != 0.0)
                throw ValidationError(strf("self-loop at vertex %lld rejected", static_cast<long long>(i)));
            for (Eigen::Index j = 0; j < n; ++j) {
                if (weights_(i, j) < 0.0)
                    throw ValidationError(strf("negative edge weight a(%lld,%lld)", static_cast<long long>(i),
                                               static_cast<long long>(j)));
                if (weights_(i, j) != weights_(j, i))
                    throw ValidationError(strf("adjacency matrix not symmetric at (%lld,%lld)",
                                               static_cast<long long>(i), static_cast<long long>(j)));
            }
        }
        adjacency_lists_.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (weights_(i, j) > 0.0) adjacency_lists_[static_cast<size_t>(i)].push_back(j);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (weights_(i, j) > 0.0) edges_.push_back({i, j, weights_(i, j)});
    }

    static Topology cycle(int n, double weight = 1.0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            const int j = (i + 1) % n;
            if (i != j) a(i, j) = a(j, i) = weight;
        }
        return Topology(a);
    }

    static Topology complete(int n, double weight = 1.0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, weight);
        a.diagonal().setZero();
        return Topology(a);
    }

    /// Star with the hub at vertex 0.
    static Topology star(int n, double weight = 1.0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 1; i < n; ++i) a(0, i) = a(i, 0) = weight;
        return Topology(a);
    }

    static Topology path(int n, double weight = 1.0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = weight;
        return Topology(a);
    }

    int size() const { return static_cast<int>(weights_.rows()); }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int i) const { return adjacency_lists_[static_cast<size_t>(i)]; }
    int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
    bool adjacent(int i, int j) const { return weights_(i, j) > 0.0; }

private:
    Eigen::MatrixXd weights_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_lists_;
};

/// Laplacian, oriented incidence matrix and algebraic connectivity.
struct SpectralData {
    Eigen::MatrixXd laplacian;  // rows sum to zero
    Eigen::MatrixXd incidence;  // N x |E|, entries in {-1, 0, +1}
    double lambda2 = 0.0;       // second-smallest Laplacian eigenvalue
};

/// Assembles L and D and computes lambda2 by a full symmetric
/// eigendecomposition (topologies here are small; no iterative methods).
inline SpectralData build_spectral(const Topology& topo) {
    const int n = topo.size();
    SpectralData out;
    out.laplacian = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double w = topo.weights()(i, j);
            out.laplacian(i, j) = -w;
            out.laplacian(i, i) += w;
        }
    }
    const auto& edges = topo.edges();
    out.incidence = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(edges.size()));
    for (size_t k = 0; k < edges.size(); ++k) {
        out.incidence(edges[k].u, static_cast<Eigen::Index>(k)) = -1.0;  // leaves the smaller vertex
        out.incidence(edges[k].v, static_cast<Eigen::Index>(k)) = 1.0;   // enters the larger vertex
    }
    if (n >= 2) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.laplacian);
        out.lambda2 = eig.eigenvalues()(1);
    }
    return out;
}

/// True iff every vertex is reachable from vertex 0 through positive-weight
/// edges. A single vertex is trivially connected.
inline bool is_connected(const Topology& topo) {
    const int n = topo.size();
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> frontier{0};
    seen[0] = 1;
    while (!frontier.empty()) {
        const int i = frontier.back();
        frontier.pop_back();
        for (int j : topo.neighbors(i)) {
            if (!seen[static_cast<size_t>(j)]) {
                seen[static_cast<size_t>(j)] = 1;
                frontier.push_back(j);
            }
        }
    }
    for (char s : seen)
        if (!s) return false;
    return true;
}

/// First pair of vertices that are neither adjacent nor share a common
/// neighbor, or nullopt when every pair is two-hop covered.
inline std::optional<std::pair<int, int>> first_uncovered_pair(const Topology& topo) {
    const int n = topo.size();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (topo.adjacent(i, j)) continue;
            bool covered = false;
            for (int k = 0; k < n && !covered; ++k)
                covered = k != i && k != j && topo.adjacent(i, k) && topo.adjacent(j, k);
            if (!covered) return std::make_pair(i, j);
        }
    }
    return std::nullopt;
}

/// True iff any two vertices are neighbors or have at least one common
/// neighbor, i.e. every closed neighborhood plus two-hop set covers the graph.
inline bool has_two_hop_cover(const Topology& topo) { return !first_uncovered_pair(topo).has_value(); }

/// Consensus gain condition for the distributed double-integrator design:
/// k1 / (2 k2^2) < lambda2.
inline bool consensus_gain_condition(double k1, double k2, double lambda2) {
    return k1 / (2.0 * k2 * k2) < lambda2;
}

}  // namespace tvopt
