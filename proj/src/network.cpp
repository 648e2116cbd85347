#include "epinet/network.hpp"

#include <algorithm>

namespace epinet {

Network::Network(std::size_t n, std::span<const Edge> edges) : neighbors_(n) {
    for (const auto& [i, j] : edges) connect(i, j);
}

bool Network::connect(int i, int j) {
    if (!keys_.insert(key(i, j)).second) return false;
    neighbors_[static_cast<std::size_t>(i)].push_back(j);
    neighbors_[static_cast<std::size_t>(j)].push_back(i);
    return true;
}

bool Network::disconnect(int i, int j) {
    if (keys_.erase(key(i, j)) == 0) return false;
    auto drop = [](std::vector<int>& list, int value) {
        auto it = std::find(list.begin(), list.end(), value);
        *it = list.back();
        list.pop_back();
    };
    drop(neighbors_[static_cast<std::size_t>(i)], j);
    drop(neighbors_[static_cast<std::size_t>(j)], i);
    return true;
}

std::vector<Edge> Network::edges() const {
    std::vector<Edge> out;
    out.reserve(keys_.size());
    for (std::size_t i = 0; i < neighbors_.size(); ++i) {
        for (int j : neighbors_[i]) {
            if (static_cast<int>(i) < j) out.emplace_back(static_cast<int>(i), j);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace epinet
