#include "istar/param_store.hpp"

#include <cmath>

namespace istar {

template <typename T>
typename ParamStore<T>::Entry& ParamStore<T>::add(const std::string& name, BasicTensor<T> value) {
    if (contains(name)) throw InputError("duplicate parameter name '" + name + "'");
    const Shape shape = value.shape();
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{name, std::move(value), BasicTensor<T>(shape), BasicTensor<T>(shape),
                             BasicTensor<T>(shape)});
    return entries_.back();
}

template <typename T>
typename ParamStore<T>::Entry& ParamStore<T>::entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
    return entries_[it->second];
}

template <typename T>
const typename ParamStore<T>::Entry& ParamStore<T>::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw InputError("unknown parameter '" + name + "'");
    return entries_[it->second];
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
    for (auto& e : entries_) e.grad.fill(T(0));
}

template <typename T>
void adam_step(ParamStore<T>& params, double lr, const AdamOptions& opts) {
    params.increment_step();
    const double t = static_cast<double>(params.step());
    const double bc1 = 1.0 - std::pow(opts.beta1, t);
    const double bc2 = 1.0 - std::pow(opts.beta2, t);
    for (auto& e : params.entries()) {
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            const double g = e.grad[i];
            const double m = opts.beta1 * static_cast<double>(e.m[i]) + (1.0 - opts.beta1) * g;
            const double v = opts.beta2 * static_cast<double>(e.v[i]) + (1.0 - opts.beta2) * g * g;
            e.m[i] = static_cast<T>(m);
            e.v[i] = static_cast<T>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            e.value[i] = static_cast<T>(static_cast<double>(e.value[i]) - lr * mhat / (std::sqrt(vhat) + opts.eps));
        }
        e.value.ensure_finite("parameter '" + e.name + "' after Adam step");
        e.grad.fill(T(0));
    }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void adam_step(ParamStore<float>&, double, const AdamOptions&);
template void adam_step(ParamStore<double>&, double, const AdamOptions&);

} // namespace istar
