#ifndef QHEDGE_DP_HPP
#define QHEDGE_DP_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "qhedge/common.hpp"

namespace qhedge {

/// Finite-horizon tabular MDP used to validate the second-moment Bellman
/// machinery. Transitions P[s][a][s'] with deterministic per-transition
/// rewards R[s][a][s'].
struct ToyMdp {
    int n_states = 1;
    int n_actions = 1;
    int horizon = 1;
    Real gamma = 1.0;
    std::vector<std::vector<std::vector<Real>>> P;  // [s][a][s']
    std::vector<std::vector<std::vector<Real>>> R;  // [s][a][s']

    void validate() const {
        if (n_states < 1 || n_actions < 1 || horizon < 1)
            throw std::invalid_argument("toy mdp: sizes must be >= 1");
        if (static_cast<int>(P.size()) != n_states || static_cast<int>(R.size()) != n_states)
            throw std::invalid_argument("toy mdp: P/R first dim");
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                Real total = 0.0;
                for (int t = 0; t < n_states; ++t) total += P[s][a][t];
                if (std::abs(total - 1.0) > 1e-12)
                    throw std::invalid_argument("toy mdp: transition row must sum to 1");
            }
        }
    }
};

/// Exact first- and second-moment tables, indexed [t][s] and [t][s][a]
/// for decision times t = 0..horizon-1.
struct DpTables {
    std::vector<std::vector<Real>> V;               // E[G_t | s]
    std::vector<std::vector<Real>> M;               // E[G_t^2 | s]
    std::vector<std::vector<std::vector<Real>>> Q;  // E[G_t | s,a]
    std::vector<std::vector<std::vector<Real>>> K;  // E[G_t^2 | s,a]
};

/// Backward induction for the return's first and second moments under a
/// fixed stochastic policy pi[s][a]. The second moment propagates as
///   K_t(s,a) = E[ R^2 + 2 gamma R V_{t+1}(s') + gamma^2 M_{t+1}(s') ],
/// the cross term carrying the dependence on the first moment.
inline DpTables dp_oracle(const ToyMdp& mdp, const std::vector<std::vector<Real>>& pi) {
    mdp.validate();
    if (static_cast<int>(pi.size()) != mdp.n_states)
        throw std::invalid_argument("dp_oracle: policy size");
    for (const auto& row : pi) {
        Real total = 0.0;
        for (Real p : row) total += p;
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("dp_oracle: policy row must sum to 1");
    }

    const int S = mdp.n_states, A = mdp.n_actions, H = mdp.horizon;
    const Real g = mdp.gamma;
    DpTables out;
    out.V.assign(H, std::vector<Real>(S, 0.0));
    out.M.assign(H, std::vector<Real>(S, 0.0));
    out.Q.assign(H, std::vector<std::vector<Real>>(S, std::vector<Real>(A, 0.0)));
    out.K.assign(H, std::vector<std::vector<Real>>(S, std::vector<Real>(A, 0.0)));

    std::vector<Real> v_next(S, 0.0), m_next(S, 0.0);
    for (int t = H - 1; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            Real vs = 0.0, ms = 0.0;
            for (int a = 0; a < A; ++a) {
                Real q = 0.0, k = 0.0;
                for (int sp = 0; sp < S; ++sp) {
                    const Real p = mdp.P[s][a][sp];
                    if (p == 0.0) continue;
                    const Real r = mdp.R[s][a][sp];
                    q += p * (r + g * v_next[sp]);
                    k += p * (r * r + 2.0 * g * r * v_next[sp] + g * g * m_next[sp]);
                }
                out.Q[t][s][a] = q;
                out.K[t][s][a] = k;
                vs += pi[s][a] * q;
                ms += pi[s][a] * k;
            }
            out.V[t][s] = vs;
            out.M[t][s] = ms;
        }
        v_next = out.V[t];
        m_next = out.M[t];
    }
    return out;
}

}  // namespace qhedge

#endif
