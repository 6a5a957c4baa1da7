#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace agb::detail {

// Static 3D k-d tree over a fixed point set, for k-nearest-neighbour queries.
class KdTree {
public:
    explicit KdTree(std::vector<std::array<double, 3>> points) : points_(std::move(points)) {
        index_.resize(points_.size());
        std::iota(index_.begin(), index_.end(), 0u);
        if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
    }

    // Squared distances to the k nearest points other than `self`, ascending.
    std::vector<double> nearest(std::uint32_t self, std::size_t k) const {
        Search search{points_[self], self, k, {}};
        search.heap.reserve(k + 1);
        if (!nodes_.empty()) visit(0, search);
        std::sort_heap(search.heap.begin(), search.heap.end());
        return search.heap;
    }

private:
    static constexpr std::uint32_t kLeafSize = 12;

    struct Node {
        std::uint32_t begin, end;
        int axis;
        double split;
        std::int32_t left = -1, right = -1;
    };

    struct Search {
        std::array<double, 3> query;
        std::uint32_t self;
        std::size_t k;
        std::vector<double> heap;  // max-heap of squared distances

        double worst() const { return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.front(); }
        void offer(double d2) {
            if (heap.size() < k) {
                heap.push_back(d2);
                std::push_heap(heap.begin(), heap.end());
            } else if (d2 < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = d2;
                std::push_heap(heap.begin(), heap.end());
            }
        }
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({begin, end, -1, 0.0});
        if (end - begin <= kLeafSize) return id;

        std::array<double, 3> lo = points_[index_[begin]], hi = lo;
        for (auto i = begin; i < end; ++i) {
            for (int a = 0; a < 3; ++a) {
                lo[a] = std::min(lo[a], points_[index_[i]][a]);
                hi[a] = std::max(hi[a], points_[index_[i]][a]);
            }
        }
        int axis = 0;
        for (int a = 1; a < 3; ++a) {
            if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
        }
        const auto mid = begin + (end - begin) / 2;
        std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                         [&](std::uint32_t l, std::uint32_t r) { return points_[l][axis] < points_[r][axis]; });
        const double split = points_[index_[mid]][axis];
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void visit(std::int32_t id, Search& search) const {
        const Node& node = nodes_[id];
        if (node.axis < 0) {
            for (auto i = node.begin; i < node.end; ++i) {
                const auto p = index_[i];
                if (p == search.self) continue;
                double d2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const double d = points_[p][a] - search.query[a];
                    d2 += d * d;
                }
                search.offer(d2);
            }
            return;
        }
        const double diff = search.query[node.axis] - node.split;
        const auto near = diff < 0.0 ? node.left : node.right;
        const auto far = diff < 0.0 ? node.right : node.left;
        visit(near, search);
        if (diff * diff <= search.worst()) visit(far, search);
    }

    std::vector<std::array<double, 3>> points_;
    std::vector<std::uint32_t> index_;
    std::vector<Node> nodes_;
};

}  // namespace agb::detail
