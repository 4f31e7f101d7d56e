#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "istar/tensor.hpp"

namespace istar {

/// Ordered name -> (value, gradient, Adam moments) map. Iteration follows
/// insertion order.
template <typename T>
class ParamStore {
public:
    struct Entry {
        std::string name;
        BasicTensor<T> value;
        BasicTensor<T> grad;
        BasicTensor<T> m;
        BasicTensor<T> v;
    };

    /// Throws InputError on a duplicate name.
    Entry& add(const std::string& name, BasicTensor<T> value);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;
    BasicTensor<T>& value(const std::string& name) { return entry(name).value; }
    const BasicTensor<T>& value(const std::string& name) const { return entry(name).value; }
    BasicTensor<T>& grad(const std::string& name) { return entry(name).grad; }

    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Total number of trainable scalars.
    std::size_t scalar_count() const noexcept;

    std::uint64_t step() const noexcept { return step_; }
    void set_step(std::uint64_t s) noexcept { step_ = s; }
    void increment_step() noexcept { ++step_; }

    void zero_grad();

    /// Copies values and moments into another precision. Gradients start at zero.
    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& e : entries_) {
            auto& d = out.add(e.name, e.value.template cast<U>());
            d.m = e.m.template cast<U>();
            d.v = e.v.template cast<U>();
        }
        out.set_step(step_);
        return out;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::uint64_t step_ = 0;
};

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update over every entry, then zeroes the gradients and
/// increments the step counter.
template <typename T>
void adam_step(ParamStore<T>& params, double lr, const AdamOptions& opts = {});

extern template class ParamStore<float>;
extern template class ParamStore<double>;

} // namespace istar
