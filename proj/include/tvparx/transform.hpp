#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tvparx/error.hpp"
#include "tvparx/model.hpp"

namespace tvparx {

enum class Transform {
    Identity,  // unconstrained
    Logistic,  // (0, 1)
    Tanh,      // (-1, 1)
    Exp,       // (kKappaFloor, inf)
};

inline constexpr double kKappaFloor = 1e-8;

/// Maps the constrained free parameters of a model to R^k and back.
///
/// beta -> logistic, phi_alpha and phi_gamma -> tanh, kappa_alpha -> exp.
/// omega, psi, the intercepts and kappa_gamma are left untouched.
class TransformMap {
public:
    explicit TransformMap(const ModelSpec& spec) : layout_(spec) {
        tags_.push_back(Transform::Identity);  // omega
        tags_.push_back(Transform::Logistic);  // beta
        tags_.insert(tags_.end(), spec.n_deterministics, Transform::Identity);
        tags_.push_back(Transform::Identity);  // delta_alpha
        if (spec.alpha_time_varying) {
            tags_.push_back(Transform::Tanh);
            tags_.push_back(Transform::Exp);
        }
        for (bool tv : spec.gamma_time_varying) {
            tags_.push_back(Transform::Identity);
            if (tv) {
                tags_.push_back(Transform::Tanh);
                tags_.push_back(Transform::Identity);
            }
        }
    }

    [[nodiscard]] const ParamLayout& layout() const { return layout_; }
    [[nodiscard]] const std::vector<Transform>& tags() const { return tags_; }

    [[nodiscard]] Vector to_unconstrained(const Vector& constrained) const {
        check_size(constrained);
        const auto names = layout_.names();
        Vector u(constrained.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double v = constrained[i];
            const auto& name = names[static_cast<std::size_t>(i)];
            switch (tags_[static_cast<std::size_t>(i)]) {
            case Transform::Identity: u[i] = v; break;
            case Transform::Logistic:
                if (!(v > 0.0 && v < 1.0)) throw Error(ErrorKind::DomainError, name + " must lie in (0, 1)");
                u[i] = std::log(v) - std::log1p(-v);
                break;
            case Transform::Tanh:
                if (!(std::abs(v) < 1.0)) throw Error(ErrorKind::DomainError, name + " must lie in (-1, 1)");
                u[i] = std::atanh(v);
                break;
            case Transform::Exp:
                if (!(v > 0.0)) throw Error(ErrorKind::DomainError, name + " must be positive");
                u[i] = std::log(v);
                break;
            }
        }
        return u;
    }

    [[nodiscard]] Vector from_unconstrained(const Vector& u) const {
        check_size(u);
        Vector v(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            switch (tags_[static_cast<std::size_t>(i)]) {
            case Transform::Identity: v[i] = u[i]; break;
            case Transform::Logistic:
                v[i] = u[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-u[i])) : std::exp(u[i]) / (1.0 + std::exp(u[i]));
                break;
            case Transform::Tanh: v[i] = std::tanh(u[i]); break;
            case Transform::Exp: v[i] = std::max(std::exp(u[i]), kKappaFloor); break;
            }
        }
        return v;
    }

    [[nodiscard]] Vector to_unconstrained(const ParamVector& theta) const {
        return to_unconstrained(layout_.pack(theta));
    }
    [[nodiscard]] ParamVector theta(const Vector& u) const { return layout_.unpack(from_unconstrained(u)); }

private:
    void check_size(const Vector& v) const {
        if (static_cast<std::size_t>(v.size()) != tags_.size()) {
            throw Error(ErrorKind::DimensionMismatch, "vector length does not match the transform map");
        }
    }

    ParamLayout layout_;
    std::vector<Transform> tags_;
};

}  // namespace tvparx
