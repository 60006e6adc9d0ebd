#include "se3/fiber.hpp"

#include <sstream>

#include "se3/error.hpp"

namespace se3 {

Fiber::Fiber(std::vector<std::pair<int, std::size_t>> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].first < 0) throw ArgumentError("Fiber: negative degree");
        if (entries_[i].second == 0) throw ArgumentError("Fiber: degree " + std::to_string(entries_[i].first) + " has no channels");
        if (i > 0 && entries_[i].first <= entries_[i - 1].first) throw ArgumentError("Fiber: degrees must be strictly increasing");
    }
}

Fiber Fiber::parse(const std::string& text) {
    std::vector<std::pair<int, std::size_t>> entries;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ArgumentError("Fiber: expected degree:channels, got '" + item + "'");
        try {
            const int degree = std::stoi(item.substr(0, colon));
            const long channels = std::stol(item.substr(colon + 1));
            if (channels <= 0) throw ArgumentError("Fiber: channels must be positive in '" + item + "'");
            entries.emplace_back(degree, static_cast<std::size_t>(channels));
        } catch (const std::logic_error&) {
            throw ArgumentError("Fiber: cannot parse '" + item + "'");
        }
    }
    return Fiber(std::move(entries));
}

Fiber Fiber::uniform(int max_degree, std::size_t channels) {
    std::vector<std::pair<int, std::size_t>> entries;
    for (int l = 0; l <= max_degree; ++l) entries.emplace_back(l, channels);
    return Fiber(std::move(entries));
}

std::vector<int> Fiber::degrees() const {
    std::vector<int> out;
    for (const auto& [l, c] : entries_) out.push_back(l);
    return out;
}

std::size_t Fiber::channels(int degree) const {
    for (const auto& [l, c] : entries_) {
        if (l == degree) return c;
    }
    return 0;
}

std::size_t Fiber::dimension() const {
    std::size_t n = 0;
    for (const auto& [l, c] : entries_) n += c * static_cast<std::size_t>(2 * l + 1);
    return n;
}

std::string Fiber::to_string() const {
    std::string s;
    for (const auto& [l, c] : entries_) {
        if (!s.empty()) s += ",";
        s += std::to_string(l) + ":" + std::to_string(c);
    }
    return s;
}

Fiber Fiber::intersect(const Fiber& other) const {
    std::vector<std::pair<int, std::size_t>> out;
    for (const auto& [l, c] : entries_) {
        if (other.has(l)) out.emplace_back(l, c);
    }
    return Fiber(std::move(out));
}

void check_conforms(const FiberFeature& feats, const Fiber& fiber, std::size_t nodes, const char* where) {
    if (feats.size() != fiber.entries().size()) {
        throw ArgumentError(std::string(where) + ": features do not match fiber " + fiber.to_string());
    }
    for (const auto& [l, c] : fiber.entries()) {
        auto it = feats.find(l);
        const Shape want{nodes, c, static_cast<std::size_t>(2 * l + 1)};
        if (it == feats.end() || it->second.shape() != want) {
            throw ArgumentError(std::string(where) + ": degree-" + std::to_string(l) + " features should be " +
                                shape_string(want) + " for fiber " + fiber.to_string());
        }
    }
}

}  // namespace se3
