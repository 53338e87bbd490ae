#ifndef QHEDGE_ADAM_HPP
#define QHEDGE_ADAM_HPP

#include <cmath>
#include <vector>

#include <json.hpp>

#include "qhedge/common.hpp"
#include "qhedge/tape.hpp"

namespace qhedge {

/// Bias-corrected Adam over a fixed list of parameter Tensors. Moment
/// buffers are laid out to mirror the parameter list handed to the
/// constructor; the list must stay stable for the optimizer's lifetime.
class Adam {
public:
    Adam() = default;

    explicit Adam(const std::vector<ad::Tensor*>& params, Real beta1 = 0.9,
                  Real beta2 = 0.999, Real eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto* p : params) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }

    long step_count() const { return t_; }

    /// One update using the gradients currently accumulated in the
    /// Tensors. Throws on non-finite gradients so trainers can abort
    /// with a clear diagnostic instead of silently corrupting weights.
    void step(const std::vector<ad::Tensor*>& params, Real lr) {
        if (params.size() != m_.size()) throw std::invalid_argument("adam: parameter list changed");
        ++t_;
        const Real bc1 = 1.0 - std::pow(beta1_, static_cast<Real>(t_));
        const Real bc2 = 1.0 - std::pow(beta2_, static_cast<Real>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            ad::Tensor& p = *params[k];
            std::vector<Real>& m = m_[k];
            std::vector<Real>& v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i) {
                const Real g = p.g[i];
                if (!std::isfinite(g)) throw NumericsError("adam: non-finite gradient");
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                const Real mhat = m[i] / bc1;
                const Real vhat = v[i] / bc2;
                p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    friend void to_json(nlohmann::json& j, const Adam& a) {
        j = nlohmann::json{{"t", a.t_},   {"beta1", a.beta1_}, {"beta2", a.beta2_},
                           {"eps", a.eps_}, {"m", a.m_},         {"v", a.v_}};
    }

    friend void from_json(const nlohmann::json& j, Adam& a) {
        j.at("t").get_to(a.t_);
        j.at("beta1").get_to(a.beta1_);
        j.at("beta2").get_to(a.beta2_);
        j.at("eps").get_to(a.eps_);
        j.at("m").get_to(a.m_);
        j.at("v").get_to(a.v_);
    }

private:
    Real beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    std::vector<std::vector<Real>> m_, v_;
};

/// target <- rho * target + (1 - rho) * online, parameter-wise.
/// rho = 0 copies the online network outright; rho = 1 freezes the target.
inline void soft_update(const std::vector<ad::Tensor*>& target,
                        const std::vector<const ad::Tensor*>& online, Real rho) {
    if (target.size() != online.size())
        throw std::invalid_argument("soft_update: parameter lists differ");
    for (std::size_t k = 0; k < target.size(); ++k) {
        ad::Tensor& t = *target[k];
        const ad::Tensor& o = *online[k];
        if (t.size() != o.size()) throw std::invalid_argument("soft_update: shape mismatch");
        for (std::size_t i = 0; i < t.size(); ++i)
            t.v[i] = rho * t.v[i] + (1.0 - rho) * o.v[i];
    }
}

}  // namespace qhedge

#endif
