#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "se3/autodiff.hpp"

namespace se3 {

/// (degree, channels) pairs with strictly increasing degrees.
class Fiber {
public:
    Fiber() = default;
    /// Throws ArgumentError on repeated/unsorted degrees or zero channels.
    explicit Fiber(std::vector<std::pair<int, std::size_t>> entries);
    /// Parses "0:3,1:2" (degree:channels, comma separated).
    static Fiber parse(const std::string& text);
    /// Degrees 0..max_degree with the same channel count.
    static Fiber uniform(int max_degree, std::size_t channels);

    const std::vector<std::pair<int, std::size_t>>& entries() const { return entries_; }
    std::vector<int> degrees() const;
    bool has(int degree) const { return channels(degree) != 0; }
    std::size_t channels(int degree) const;
    int max_degree() const { return entries_.empty() ? -1 : entries_.back().first; }
    /// Sum over degrees of C_l (2l+1).
    std::size_t dimension() const;
    std::string to_string() const;
    /// Degrees present in both, with this fiber's channel counts.
    Fiber intersect(const Fiber& other) const;

    bool operator==(const Fiber& other) const { return entries_ == other.entries_; }

private:
    std::vector<std::pair<int, std::size_t>> entries_;
};

/// Features on a tape: degree -> Var of shape [N, C, 2l+1].
using FiberFeature = std::map<int, Var>;

/// Throws ArgumentError unless feats has exactly the fiber's degrees and shapes for N nodes.
void check_conforms(const FiberFeature& feats, const Fiber& fiber, std::size_t nodes, const char* where);

}  // namespace se3
