#include "aggmrf/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace aggmrf {

ModelParams ModelParams::zeros(std::shared_ptr<const ProjectionSet> ps) {
    ModelParams p;
    p.mu.assign(ps->size(), 0.0);
    p.theta.assign(ps->size(), 0.0);
    p.projection = std::move(ps);
    return p;
}

bool ModelParams::finite() const noexcept {
    for (double v : mu)
        if (!std::isfinite(v)) return false;
    for (double v : theta)
        if (!std::isfinite(v)) return false;
    return true;
}

double sigmoid(double z) noexcept {
    z = std::clamp(z, -700.0, 700.0);
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_potential(const ModelParams& p, std::span<const Modality> x, int y) {
    const auto& ps = p.ps();
    double s = 0;
    for (std::size_t t = 0; t < ps.num_tables(); ++t) {
        const std::size_t k = ps.map_row(ps.base_row(t, x));
        s += y ? p.mu[k] + p.theta[k] : p.mu[k];
    }
    return s;
}

double logit(const ModelParams& p, std::span<const Modality> x) {
    const auto& ps = p.ps();
    double s = 0;
    for (std::size_t t = 0; t < ps.num_tables(); ++t) s += p.theta[ps.map_row(ps.base_row(t, x))];
    return s;
}

double predict_proba(const ModelParams& p, std::span<const Modality> x) {
    return sigmoid(logit(p, x));
}

std::vector<double> conditional_feature_dist(const ModelParams& p, std::span<const Modality> x,
                                             std::size_t d, int y) {
    const auto& ps = p.ps();
    ps.schema().validate(x);
    const Modality M = ps.schema().cardinality(d);
    std::vector<double> score(M, 0.0);
    for (std::size_t t : ps.tables_of(d)) {
        const auto& tab = ps.tables()[t];
        std::size_t base = tab.offset;
        std::size_t stride = 0;
        for (std::size_t j = 0; j < tab.features.size(); ++j) {
            if (tab.features[j] == d)
                stride = tab.strides[j];
            else
                base += x[tab.features[j]] * tab.strides[j];
        }
        for (Modality m = 0; m < M; ++m) {
            const std::size_t k = ps.map_row(base + m * stride);
            score[m] += y ? p.mu[k] + p.theta[k] : p.mu[k];
        }
    }
    const double top = *std::max_element(score.begin(), score.end());
    double total = 0;
    for (double& s : score) total += (s = std::exp(s - top));
    for (double& s : score) s /= total;
    return score;
}

ExactJoint exact_joint(const ModelParams& p, std::uint64_t cap) {
    const auto& schema = p.ps().schema();
    const std::uint64_t S = schema.state_space_size();
    if (S == UINT64_MAX || S > cap / 2)
        throw Error("state space too large for exact enumeration (" + std::to_string(S) +
                    " feature vectors × 2 labels exceeds cap " + std::to_string(cap) + ")");
    ExactJoint joint;
    joint.dims = schema.size();
    joint.states.resize(S * joint.dims);
    joint.prob.resize(2 * S);

    std::vector<Modality> x(joint.dims, 0);
    double top = -INFINITY;
    for (std::uint64_t s = 0; s < S; ++s) {
        std::copy(x.begin(), x.end(), joint.states.begin() + s * joint.dims);
        const double mu_part = log_potential(p, x, 0);
        const double theta_part = logit(p, x);
        joint.prob[2 * s] = mu_part;
        joint.prob[2 * s + 1] = mu_part + theta_part;
        top = std::max({top, joint.prob[2 * s], joint.prob[2 * s + 1]});
        // mixed-radix increment, last feature fastest
        for (std::size_t d = joint.dims; d-- > 0;) {
            if (++x[d] < schema.cardinality(d)) break;
            x[d] = 0;
        }
    }
    double total = 0;
    for (double lw : joint.prob) total += std::exp(lw - top);
    joint.log_z = top + std::log(total);
    for (double& lw : joint.prob) lw = std::exp(lw - joint.log_z);
    return joint;
}

ExactMoments moments_of(const ModelParams& p, const ExactJoint& joint, double n) {
    const auto& ps = p.ps();
    ExactMoments m;
    m.log_z = joint.log_z;
    m.z = std::exp(joint.log_z);
    m.n = n;
    m.expected_d.assign(ps.size(), 0.0);
    m.expected_c.assign(ps.size(), 0.0);
    std::vector<std::size_t> rows(ps.num_tables());
    for (std::size_t s = 0; s < joint.num_states(); ++s) {
        const double p0 = joint.prob[2 * s];
        const double p1 = joint.prob[2 * s + 1];
        ps.rows_of(joint.x(s), rows);
        for (std::size_t k : rows) {
            m.expected_d[k] += n * (p0 + p1);
            m.expected_c[k] += n * p1;
        }
    }
    return m;
}

ExactMoments exact_moments(const ModelParams& p, double n, std::uint64_t cap) {
    return moments_of(p, exact_joint(p, cap), n);
}

double exact_nll_of_dataset(const ModelParams& p, const Dataset& ds, std::uint64_t cap) {
    const auto& schema = p.ps().schema();
    const std::uint64_t S = schema.state_space_size();
    if (S == UINT64_MAX || S > cap / 2) throw Error("state space too large for exact enumeration");
    // log Z by enumeration without materializing the joint
    std::vector<Modality> x(schema.size(), 0);
    std::vector<double> lw;
    lw.reserve(2 * S);
    for (std::uint64_t s = 0; s < S; ++s) {
        const double a = log_potential(p, x, 0);
        lw.push_back(a);
        lw.push_back(a + logit(p, x));
        for (std::size_t d = schema.size(); d-- > 0;) {
            if (++x[d] < schema.cardinality(d)) break;
            x[d] = 0;
        }
    }
    const double top = *std::max_element(lw.begin(), lw.end());
    double total = 0;
    for (double v : lw) total += std::exp(v - top);
    const double log_z = top + std::log(total);

    double nll = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) nll -= log_potential(p, ds.x(i), ds.y(i)) - log_z;
    return nll;
}

void save_model(const ModelParams& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    char fp[32];
    std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(p.ps().fingerprint()));
    out << "mrfmodel v1 K=" << p.size() << " fingerprint=" << fp << '\n';
    out << "mu\n";
    for (double v : p.mu) out << detail::format_hex(v) << '\n';
    out << "theta\n";
    for (double v : p.theta) out << detail::format_hex(v) << '\n';
    out << "end\n";
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

ModelParams load_model(const std::filesystem::path& path, std::shared_ptr<const ProjectionSet> ps) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("mrfmodel v1 "))
        throw Error("not an mrfmodel v1 file: '" + path.string() + "'");
    const auto head = detail::parse_fields(line);
    const auto K = static_cast<std::size_t>(detail::field_int(head, "K"));
    if (K != ps->size())
        throw Error("model has K=" + std::to_string(K) + " but projection has K=" +
                    std::to_string(ps->size()));
    const auto fp = std::stoull(detail::field(head, "fingerprint"), nullptr, 16);
    if (fp != ps->fingerprint()) throw Error("model fingerprint does not match the projection");

    ModelParams p = ModelParams::zeros(std::move(ps));
    auto read_block = [&](const char* name, std::vector<double>& v) {
        if (!std::getline(in, line) || line != name) throw Error("model file truncated");
        for (std::size_t k = 0; k < K; ++k) {
            if (!std::getline(in, line)) throw Error("model file truncated");
            v[k] = detail::parse_double(line);
        }
    };
    read_block("mu", p.mu);
    read_block("theta", p.theta);
    if (!std::getline(in, line) || line != "end") throw Error("model file truncated");
    return p;
}

}  // namespace aggmrf
