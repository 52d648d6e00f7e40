#ifndef PFALAB_TESTS_ORACLE_HPP
#define PFALAB_TESTS_ORACLE_HPP

// Independent straight-line reimplementation of the training objectives,
// written against plain std::vector with explicit loops and no shared code
// with the library under test. Everything is computed from raw weights.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // rows

struct Mlp {
    // layer l maps dims[l] -> dims[l+1]; relu between layers, linear last
    std::vector<std::size_t> dims;
    std::vector<Mat> weights;  // [l][in][out]
    std::vector<Vec> biases;   // [l][out]
};

inline Vec mlp_forward(const Mlp& m, const Vec& x) {
    Vec h = x;
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        Vec next(m.dims[l + 1], 0.0);
        for (std::size_t o = 0; o < next.size(); ++o) {
            double s = m.biases[l][o];
            for (std::size_t i = 0; i < h.size(); ++i) s += h[i] * m.weights[l][i][o];
            next[o] = s;
        }
        if (l + 2 < m.dims.size())
            for (auto& v : next) v = v > 0.0 ? v : 0.0;
        h = next;
    }
    return h;
}

struct Linear {
    Mat w;  // [in][out]
    Vec b;
};

inline Vec linear_forward(const Linear& lin, const Vec& f) {
    Vec out(lin.b);
    for (std::size_t o = 0; o < out.size(); ++o)
        for (std::size_t i = 0; i < f.size(); ++i) out[o] += f[i] * lin.w[i][o];
    return out;
}

inline Vec softmax(const Vec& z) {
    double mx = z[0];
    for (double v : z) mx = v > mx ? v : mx;
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        p[j] = std::exp(z[j] - mx);
        sum += p[j];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline double cross_entropy(const Vec& logits, int target) {
    return -std::log(softmax(logits)[static_cast<std::size_t>(target)]);
}

inline int argmax(const Vec& v) {
    int best = 0;
    for (std::size_t j = 1; j < v.size(); ++j)
        if (v[j] > v[best]) best = static_cast<int>(j);
    return best;
}

inline double cosine(const Vec& a, const Vec& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
        na += a[j] * a[j];
        nb += b[j] * b[j];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// mean cross-entropy of the classifier over labeled rows
inline double labeled_objective(const Mlp& f, const Linear& cls, const Mat& x_l,
                                const std::vector<int>& y_l) {
    double s = 0.0;
    for (std::size_t i = 0; i < x_l.size(); ++i)
        s += cross_entropy(linear_forward(cls, mlp_forward(f, x_l[i])), y_l[i]);
    return s / static_cast<double>(x_l.size());
}

// weak-view pseudo-labels gated at tau; consistency CE on strong views,
// summed over accepted samples and divided by the full unlabeled batch size
inline double fixmatch_unlabeled_objective(const Mlp& f, const Linear& cls, const Mat& weak_u,
                                           const Mat& strong_u, double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < weak_u.size(); ++i) {
        Vec p = softmax(linear_forward(cls, mlp_forward(f, weak_u[i])));
        int lbl = argmax(p);
        if (p[lbl] >= tau)
            s += cross_entropy(linear_forward(cls, mlp_forward(f, strong_u[i])), lbl);
    }
    return s / static_cast<double>(weak_u.size());
}

// -log softmax over cosine similarities to the prototypes, scaled by 1/T
inline double prototype_term(const Mat& mu, double temperature, const Vec& feature, int target) {
    Vec logits(mu.size());
    for (std::size_t c = 0; c < mu.size(); ++c)
        logits[c] = cosine(mu[c], feature) / temperature;
    return cross_entropy(logits, target);
}

// gated unlabeled mean (weak-view pseudo-labels, strong-view features) plus
// labeled mean on strong views
inline double feature_adjust_objective(const Mlp& f, const Linear& cls, const Mat& mu,
                                       double temperature, const Mat& strong_l,
                                       const std::vector<int>& y_l, const Mat& weak_u,
                                       const Mat& strong_u, double tau) {
    double u = 0.0;
    for (std::size_t i = 0; i < weak_u.size(); ++i) {
        Vec p = softmax(linear_forward(cls, mlp_forward(f, weak_u[i])));
        int lbl = argmax(p);
        if (p[lbl] >= tau)
            u += prototype_term(mu, temperature, mlp_forward(f, strong_u[i]), lbl);
    }
    u /= static_cast<double>(weak_u.size());
    double l = 0.0;
    for (std::size_t i = 0; i < strong_l.size(); ++i)
        l += prototype_term(mu, temperature, mlp_forward(f, strong_l[i]), y_l[i]);
    l /= static_cast<double>(strong_l.size());
    return u + l;
}

inline double total_objective(double loss_l, double loss_u, double lambda) {
    return loss_l + lambda * loss_u;
}

}  // namespace oracle

#endif
