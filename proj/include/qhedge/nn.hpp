#ifndef QHEDGE_NN_HPP
#define QHEDGE_NN_HPP

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "qhedge/common.hpp"
#include "qhedge/rng.hpp"
#include "qhedge/tape.hpp"

namespace qhedge {

enum class OutputActivation { Identity, Sigmoid };
enum class OutputInit { Xavier, Zero };

/// Architecture of a dense feed-forward network. Hidden layers use ReLU;
/// dropout and per-sample layer normalization are optional and only act on
/// hidden layers.
struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden_dims;
    int output_dim = 1;
    OutputActivation output_activation = OutputActivation::Identity;
    Real dropout_p = 0.0;
    bool layer_norm = false;

    void validate() const {
        if (input_dim < 1 || output_dim < 1)
            throw ConfigError("mlp: input_dim and output_dim must be >= 1");
        for (int h : hidden_dims)
            if (h < 1) throw ConfigError("mlp: hidden dims must be >= 1");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0))
            throw ConfigError("mlp: dropout_p must be in [0,1)");
    }

    bool operator==(const MlpSpec&) const = default;
};

/// Dense network: parameter Tensors plus forward passes. The train-mode
/// forward records onto a caller-supplied tape; the eval forward is a
/// plain loop with dropout off.
class Mlp {
public:
    Mlp() = default;

    /// He-uniform init for the ReLU hidden layers; the output layer is
    /// either Xavier-uniform or zeroed (zero makes the initial policy
    /// output exactly the output-layer bias, a useful neutral start).
    Mlp(const MlpSpec& spec, NormalSource& rng, OutputInit out_init = OutputInit::Xavier)
        : spec_(spec) {
        spec_.validate();
        std::vector<int> dims;
        dims.push_back(spec_.input_dim);
        for (int h : spec_.hidden_dims) dims.push_back(h);
        dims.push_back(spec_.output_dim);
        const std::size_t n_layers = dims.size() - 1;
        for (std::size_t l = 0; l < n_layers; ++l) {
            const int in = dims[l], out = dims[l + 1];
            W_.emplace_back(in, out);
            b_.emplace_back(1, out);
            const bool is_output = l + 1 == n_layers;
            if (is_output && out_init == OutputInit::Zero) {
                // leave zeros
            } else {
                const Real limit = is_output
                                       ? std::sqrt(6.0 / static_cast<Real>(in + out))
                                       : std::sqrt(6.0 / static_cast<Real>(in));
                for (Real& w : W_.back().v) w = (2.0 * rng.uniform01() - 1.0) * limit;
            }
            if (spec_.layer_norm && !is_output) {
                ln_gamma_.emplace_back(1, out);
                ln_beta_.emplace_back(1, out);
                for (Real& g : ln_gamma_.back().v) g = 1.0;
            }
        }
    }

    const MlpSpec& spec() const { return spec_; }

    /// Records a batched forward pass; returns the output node id.
    /// rng is only consulted when training with dropout enabled.
    int forward(ad::Tape& tape, int input, bool train = false,
                NormalSource* dropout_rng = nullptr) {
        int x = input;
        const std::size_t n_layers = W_.size();
        for (std::size_t l = 0; l < n_layers; ++l) {
            x = tape.affine(x, W_[l], b_[l]);
            const bool is_output = l + 1 == n_layers;
            if (is_output) {
                if (spec_.output_activation == OutputActivation::Sigmoid) x = tape.sigmoid(x);
                break;
            }
            if (spec_.layer_norm) x = tape.layer_norm(x, ln_gamma_[l], ln_beta_[l]);
            x = tape.relu(x);
            if (train && spec_.dropout_p > 0.0) {
                if (dropout_rng == nullptr)
                    throw std::invalid_argument("mlp forward: dropout needs an RNG");
                x = tape.dropout(x, spec_.dropout_p, *dropout_rng);
            }
        }
        return x;
    }

    /// Tape-free batched forward for frozen-policy evaluation.
    void forward_eval(const Real* input, int batch, Real* output) const {
        thread_local std::vector<Real> buf_a, buf_b;
        const std::size_t n_layers = W_.size();
        const Real* cur = input;
        int cur_dim = spec_.input_dim;
        for (std::size_t l = 0; l < n_layers; ++l) {
            const int out = W_[l].cols;
            const bool is_output = l + 1 == n_layers;
            std::vector<Real>& dst_buf = (l % 2 == 0) ? buf_a : buf_b;
            dst_buf.assign(static_cast<std::size_t>(batch) * out, 0.0);
            Real* dst = is_output ? output : dst_buf.data();
            for (int r = 0; r < batch; ++r) {
                Real* yrow = dst + static_cast<std::size_t>(r) * out;
                for (int o = 0; o < out; ++o) yrow[o] = b_[l].v[static_cast<std::size_t>(o)];
                const Real* xrow = cur + static_cast<std::size_t>(r) * cur_dim;
                for (int i = 0; i < cur_dim; ++i) {
                    const Real xi = xrow[i];
                    const Real* wrow = W_[l].v.data() + static_cast<std::size_t>(i) * out;
                    for (int o = 0; o < out; ++o) yrow[o] += xi * wrow[o];
                }
            }
            if (is_output) {
                if (spec_.output_activation == OutputActivation::Sigmoid)
                    for (int i = 0; i < batch * out; ++i)
                        output[i] = 1.0 / (1.0 + std::exp(-output[i]));
                return;
            }
            if (spec_.layer_norm) apply_layer_norm_eval(dst, batch, out, l);
            for (int i = 0; i < batch * out; ++i)
                if (dst[i] < 0.0) dst[i] = 0.0;
            cur = dst;
            cur_dim = out;
        }
    }

    Real forward_eval_scalar(const std::vector<Real>& input) const {
        if (spec_.output_dim != 1) throw std::invalid_argument("forward_eval_scalar: dim != 1");
        Real out = 0.0;
        forward_eval(input.data(), 1, &out);
        return out;
    }

    std::vector<ad::Tensor*> params() {
        std::vector<ad::Tensor*> ps;
        for (auto& t : W_) ps.push_back(&t);
        for (auto& t : b_) ps.push_back(&t);
        for (auto& t : ln_gamma_) ps.push_back(&t);
        for (auto& t : ln_beta_) ps.push_back(&t);
        return ps;
    }

    std::vector<const ad::Tensor*> params() const {
        std::vector<const ad::Tensor*> ps;
        for (auto& t : W_) ps.push_back(&t);
        for (auto& t : b_) ps.push_back(&t);
        for (auto& t : ln_gamma_) ps.push_back(&t);
        for (auto& t : ln_beta_) ps.push_back(&t);
        return ps;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

    bool finite() const {
        for (const auto* p : params())
            for (Real v : p->v)
                if (!std::isfinite(v)) return false;
        return true;
    }

private:
    MlpSpec spec_;
    std::vector<ad::Tensor> W_, b_, ln_gamma_, ln_beta_;

    void apply_layer_norm_eval(Real* x, int batch, int c, std::size_t l) const {
        constexpr Real eps = 1e-5;
        const ad::Tensor& gamma = ln_gamma_[l];
        const ad::Tensor& beta = ln_beta_[l];
        for (int r = 0; r < batch; ++r) {
            Real* row = x + static_cast<std::size_t>(r) * c;
            Real m = 0.0;
            for (int j = 0; j < c; ++j) m += row[j];
            m /= static_cast<Real>(c);
            Real var = 0.0;
            for (int j = 0; j < c; ++j) var += (row[j] - m) * (row[j] - m);
            var /= static_cast<Real>(c);
            const Real is = 1.0 / std::sqrt(var + eps);
            for (int j = 0; j < c; ++j)
                row[j] = gamma.v[static_cast<std::size_t>(j)] * (row[j] - m) * is +
                         beta.v[static_cast<std::size_t>(j)];
        }
    }

    friend void to_json(nlohmann::json& j, const Mlp& net);
    friend void from_json(const nlohmann::json& j, Mlp& net);
};

inline void to_json(nlohmann::json& j, const MlpSpec& s) {
    j = nlohmann::json{
        {"input_dim", s.input_dim},
        {"hidden_dims", s.hidden_dims},
        {"output_dim", s.output_dim},
        {"output_activation",
         s.output_activation == OutputActivation::Sigmoid ? "sigmoid" : "identity"},
        {"dropout_p", s.dropout_p},
        {"layer_norm", s.layer_norm},
    };
}

inline void from_json(const nlohmann::json& j, MlpSpec& s) {
    j.at("input_dim").get_to(s.input_dim);
    j.at("hidden_dims").get_to(s.hidden_dims);
    j.at("output_dim").get_to(s.output_dim);
    const std::string act = j.at("output_activation").get<std::string>();
    if (act == "sigmoid")
        s.output_activation = OutputActivation::Sigmoid;
    else if (act == "identity")
        s.output_activation = OutputActivation::Identity;
    else
        throw ConfigError("mlp spec: unknown output_activation '" + act + "'");
    j.at("dropout_p").get_to(s.dropout_p);
    j.at("layer_norm").get_to(s.layer_norm);
}

namespace detail {
inline nlohmann::json tensors_to_json(const std::vector<ad::Tensor>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts)
        arr.push_back(nlohmann::json{{"rows", t.rows}, {"cols", t.cols}, {"v", t.v}});
    return arr;
}

inline std::vector<ad::Tensor> tensors_from_json(const nlohmann::json& arr) {
    std::vector<ad::Tensor> ts;
    for (const auto& jt : arr) {
        ad::Tensor t(jt.at("rows").get<int>(), jt.at("cols").get<int>());
        jt.at("v").get_to(t.v);
        if (t.v.size() != t.size()) throw IoError("tensor payload size mismatch");
        ts.push_back(std::move(t));
    }
    return ts;
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const Mlp& net) {
    j = nlohmann::json{{"spec", net.spec_},
                       {"W", detail::tensors_to_json(net.W_)},
                       {"b", detail::tensors_to_json(net.b_)},
                       {"ln_gamma", detail::tensors_to_json(net.ln_gamma_)},
                       {"ln_beta", detail::tensors_to_json(net.ln_beta_)}};
}

inline void from_json(const nlohmann::json& j, Mlp& net) {
    j.at("spec").get_to(net.spec_);
    net.W_ = detail::tensors_from_json(j.at("W"));
    net.b_ = detail::tensors_from_json(j.at("b"));
    net.ln_gamma_ = detail::tensors_from_json(j.at("ln_gamma"));
    net.ln_beta_ = detail::tensors_from_json(j.at("ln_beta"));
}

}  // namespace qhedge

#endif
