#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "epinet/types.hpp"

namespace epinet {

/// Undirected simple graph over individuals 0..N-1. Pairs are keyed by
/// (min, max); neighbor lists are kept alongside for iteration.
class Network {
public:
    Network() = default;
    explicit Network(std::size_t n) : neighbors_(n) {}
    Network(std::size_t n, std::span<const Edge> edges);

    std::size_t size() const { return neighbors_.size(); }
    std::size_t edge_count() const { return keys_.size(); }

    bool connected(int i, int j) const { return keys_.contains(key(i, j)); }
    /// Returns false if the pair was already connected.
    bool connect(int i, int j);
    /// Returns false if the pair was not connected.
    bool disconnect(int i, int j);

    std::span<const int> neighbors(int i) const { return neighbors_[static_cast<std::size_t>(i)]; }
    std::vector<Edge> edges() const;

    bool operator==(const Network& other) const { return keys_ == other.keys_; }

private:
    static std::uint64_t key(int i, int j) {
        const auto [a, b] = make_edge(i, j);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    }

    std::vector<std::vector<int>> neighbors_;
    std::unordered_set<std::uint64_t> keys_;
};

}  // namespace epinet
