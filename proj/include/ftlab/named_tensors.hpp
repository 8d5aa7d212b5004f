#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ftlab/tensor.hpp"

namespace ftlab {

// Ordered name -> tensor map. Iteration follows insertion order, which is
// what serialization, parameter binding and optimizer state all key off.
class NamedTensors {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(std::string name, Tensor t) {
        if (index_.contains(name)) throw ContractError("duplicate parameter name: " + name);
        index_.emplace(name, entries_.size());
        entries_.push_back({std::move(name), std::move(t)});
    }

    bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

    const Tensor& at(std::string_view name) const { return entries_[index_of(name)].tensor; }
    Tensor& at(std::string_view name) { return entries_[index_of(name)].tensor; }

    size_t index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw CheckpointError("missing parameter: " + std::string(name));
        return it->second;
    }

    size_t size() const { return entries_.size(); }
    const Entry& entry(size_t i) const { return entries_[i]; }
    Entry& entry(size_t i) { return entries_[i]; }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.name);
        return out;
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    bool bit_equal(const NamedTensors& o) const {
        if (entries_.size() != o.entries_.size()) return false;
        for (size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name != o.entries_[i].name) return false;
            if (entries_[i].tensor.dims() != o.entries_[i].tensor.dims()) return false;
            const auto a = entries_[i].tensor.values();
            const auto b = o.entries_[i].tensor.values();
            for (size_t j = 0; j < a.size(); ++j) {
                if (std::bit_cast<uint64_t>(a[j]) != std::bit_cast<uint64_t>(b[j])) return false;
            }
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace ftlab
