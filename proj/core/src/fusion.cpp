#include "oread/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <stdexcept>

#include "oread/track_io.hpp"

namespace oread::fusion {

namespace {

constexpr int kQuadraturePoints = 8192;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct LogKde {
    std::vector<double> y; // log-shifted samples
    double h = 0.0;        // bandwidth

    double pdf(double yy) const {
        double s = 0.0;
        for (double yi : y) {
            const double u = (yy - yi) / h;
            s += std::exp(-0.5 * u * u);
        }
        return s / (static_cast<double>(y.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    }
    double cdf(double yy) const {
        double s = 0.0;
        for (double yi : y) s += normal_cdf((yy - yi) / h);
        return s / static_cast<double>(y.size());
    }
};

} // namespace

NormalizationStats fit_normalizer(std::span<const double> samples, double alpha) {
    if (samples.size() < 30)
        throw std::invalid_argument("fit_normalizer: need at least 30 samples");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("fit_normalizer: alpha outside (0, 1)");
    for (double s : samples)
        if (!std::isfinite(s))
            throw std::invalid_argument("fit_normalizer: non-finite sample");

    const auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    const double mn = *mn_it, mx = *mx_it;
    const bool degenerate = mn == mx;

    // Shift so every sample is at least eps above zero before the log.
    const double eps = std::max(1e-9, 0.01 * (mx - mn));
    const double shift = std::max(0.0, eps - mn);

    LogKde kde;
    kde.y.reserve(samples.size());
    for (double s : samples) kde.y.push_back(std::log(s + shift));

    double ymean = 0.0;
    for (double v : kde.y) ymean += v;
    ymean /= static_cast<double>(kde.y.size());
    double yvar = 0.0;
    for (double v : kde.y) yvar += (v - ymean) * (v - ymean);
    yvar /= static_cast<double>(kde.y.size());
    const double ystd = std::sqrt(yvar);

    const double n = static_cast<double>(kde.y.size());
    kde.h = std::max(std::pow(4.0 / (3.0 * n), 0.2) * ystd, 1e-9);

    const auto [ymn_it, ymx_it] = std::minmax_element(kde.y.begin(), kde.y.end());
    // Margin covers the kernels' tails; the extra 2h^2 covers the mode shift
    // of exp(2y) times a Gaussian kernel, which the second moment needs.
    const double margin = 6.0 * (ystd + kde.h);
    const double lo = *ymn_it - margin;
    const double hi = *ymx_it + margin + 2.0 * kde.h * kde.h;

    // Trapezoidal moments of X = exp(Y) - shift over the log-domain grid.
    const double dy = (hi - lo) / (kQuadraturePoints - 1);
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < kQuadraturePoints; ++i) {
        const double yy = lo + dy * i;
        const double w = (i == 0 || i == kQuadraturePoints - 1) ? 0.5 : 1.0;
        const double p = kde.pdf(yy);
        const double ex = std::exp(yy);
        m1 += w * ex * p;
        m2 += w * ex * ex * p;
    }
    m1 *= dy;
    m2 *= dy;

    NormalizationStats st;
    st.alpha = alpha;
    st.shift = shift;
    st.bandwidth = kde.h;
    st.mu = m1 - shift;
    st.sigma = std::sqrt(std::max(m2 - m1 * m1, 0.0));
    if (degenerate || st.sigma < 1e-6) {
        std::cerr << "fit_normalizer: degenerate sample spread, flooring sigma at 1e-6\n";
        st.sigma = 1e-6;
    }

    // Quantile by bisection on the analytic kernel-mixture CDF.
    double qlo = lo, qhi = hi;
    for (int iter = 0; iter < 200 && qhi - qlo > 1e-14 * std::max(1.0, std::abs(qhi));
         ++iter) {
        const double mid = 0.5 * (qlo + qhi);
        (kde.cdf(mid) < alpha ? qlo : qhi) = mid;
    }
    st.tau = std::exp(0.5 * (qlo + qhi)) - shift;
    return st;
}

double ensemble_threshold(const std::array<NormalizationStats, 4>& stats) {
    double sum = 0.0;
    for (const NormalizationStats& s : stats) sum += normalize(s.tau, s);
    return 0.25 * sum;
}

namespace {

Eigen::Matrix<double, 5, 5> transition() {
    Eigen::Matrix<double, 5, 5> a = Eigen::Matrix<double, 5, 5>::Zero();
    a.topLeftCorner<4, 4>().setIdentity();
    a.row(4) << 0.25, 0.25, 0.25, 0.25, 0.0;
    return a;
}

Eigen::Matrix<double, 4, 5> observation() {
    Eigen::Matrix<double, 4, 5> h = Eigen::Matrix<double, 4, 5>::Zero();
    h.topLeftCorner<4, 4>().setIdentity();
    return h;
}

} // namespace

KalmanState kalman_init(const Eigen::Vector4d& obs) {
    if (!obs.allFinite()) throw std::invalid_argument("kalman_init: non-finite observation");
    KalmanState s;
    s.x.head<4>() = obs;
    s.x(4) = 0.25 * obs.sum();
    s.P = 0.1 * Eigen::Matrix<double, 5, 5>::Identity();
    return s;
}

KalmanState kalman_step(const KalmanState& prev, const Eigen::Vector4d& obs) {
    if (!obs.allFinite()) throw std::invalid_argument("kalman_step: non-finite observation");
    static const Eigen::Matrix<double, 5, 5> A = transition();
    static const Eigen::Matrix<double, 4, 5> H = observation();
    static const Eigen::Matrix<double, 5, 5> Q =
        0.1 * Eigen::Matrix<double, 5, 5>::Identity();
    static const Eigen::Matrix<double, 4, 4> R = Eigen::Matrix<double, 4, 4>::Identity();

    const Eigen::Matrix<double, 5, 1> xp = A * prev.x;
    const Eigen::Matrix<double, 5, 5> Pp = A * prev.P * A.transpose() + Q;
    const Eigen::Matrix<double, 4, 4> S = H * Pp * H.transpose() + R;
    const Eigen::Matrix<double, 5, 4> K = Pp * H.transpose() * S.inverse();

    KalmanState next;
    next.x = xp + K * (obs - H * xp);
    next.P = (Eigen::Matrix<double, 5, 5>::Identity() - K * H) * Pp;
    next.P = 0.5 * (next.P + next.P.transpose()).eval();
    return next;
}

FilterMode filter_mode_from_string(const std::string& s) {
    if (s == "deferred") return FilterMode::deferred;
    if (s == "immediate") return FilterMode::immediate;
    throw std::invalid_argument("unknown filter mode: " + s);
}

std::string to_string(FilterMode m) {
    return m == FilterMode::deferred ? "deferred" : "immediate";
}

FusedVideo fuse(const std::array<const ScoreSeries*, 4>& series,
                const std::array<NormalizationStats, 4>& stats, FilterMode mode) {
    for (const ScoreSeries* s : series)
        if (!s) throw std::invalid_argument("fuse: null series");
    const int32_t n = series[0]->size();
    for (const ScoreSeries* s : series) {
        if (s->size() != n) throw std::invalid_argument("fuse: series length mismatch");
        if (s->video_id != series[0]->video_id)
            throw std::invalid_argument("fuse: series video mismatch");
    }
    if (n == 0) throw std::invalid_argument("fuse: empty series");

    int32_t t_all = 0;
    if (mode == FilterMode::deferred)
        for (const ScoreSeries* s : series) t_all = std::max(t_all, s->valid_from);

    FusedVideo out;
    out.fused.video_id = series[0]->video_id;
    out.fused.valid_from = t_all;
    out.fused.values.resize(static_cast<size_t>(n));
    for (auto& lane : out.states) lane.resize(static_cast<size_t>(n));

    KalmanState state;
    for (int32_t t = 0; t < n; ++t) {
        Eigen::Vector4d obs;
        for (size_t e = 0; e < 4; ++e) {
            // Frames the expert has not reached yet observe the assigned
            // normal score, which normalization maps to zero.
            obs(static_cast<Eigen::Index>(e)) =
                t < series[e]->valid_from
                    ? 0.0
                    : normalize(series[e]->values[static_cast<size_t>(t)], stats[e]);
        }
        state = (t == 0 || t < t_all) ? kalman_init(obs) : kalman_step(state, obs);
        out.fused.values[static_cast<size_t>(t)] = state.x(4);
        for (size_t e = 0; e < 4; ++e)
            out.states[e][static_cast<size_t>(t)] = state.x(static_cast<Eigen::Index>(e));
    }
    return out;
}

Involvement classify_video(const FusedVideo& video) {
    const size_t n = video.states[0].size();
    if (n == 0) throw std::invalid_argument("classify_video: empty state history");
    const size_t k = static_cast<size_t>(std::ceil(0.1 * static_cast<double>(n)));

    std::array<double, 4> top_mean{};
    for (size_t e = 0; e < 4; ++e) {
        std::vector<double> lane = video.states[e];
        std::partial_sort(lane.begin(), lane.begin() + static_cast<long>(k), lane.end(),
                          std::greater<>());
        double s = 0.0;
        for (size_t i = 0; i < k; ++i) s += lane[i];
        top_mean[e] = s / static_cast<double>(k);
    }
    const double scene = top_mean[kFfp] + top_mean[kStr];
    const double trajectory = top_mean[kInt] + top_mean[kBeh];
    return scene > trajectory ? Involvement::ego : Involvement::non_ego;
}

void write_stats(const std::filesystem::path& path,
                 const std::array<NormalizationStats, 4>& stats) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_stats: cannot open " + path.string());
    for (size_t e = 0; e < 4; ++e) {
        const NormalizationStats& s = stats[e];
        const std::string p = kExpertNames[e];
        out << p << ".mu=" << io::format_double(s.mu) << '\n';
        out << p << ".sigma=" << io::format_double(s.sigma) << '\n';
        out << p << ".tau=" << io::format_double(s.tau) << '\n';
        out << p << ".shift=" << io::format_double(s.shift) << '\n';
        out << p << ".bandwidth=" << io::format_double(s.bandwidth) << '\n';
        out << p << ".alpha=" << io::format_double(s.alpha) << '\n';
    }
    if (!out) throw std::runtime_error("write_stats: write failed for " + path.string());
}

std::array<NormalizationStats, 4> read_stats(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_stats: cannot open " + path.string());
    std::map<std::string, double> kv;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
    }
    std::array<NormalizationStats, 4> stats;
    for (size_t e = 0; e < 4; ++e) {
        const std::string p = kExpertNames[e];
        auto get = [&](const std::string& field) {
            auto it = kv.find(p + "." + field);
            if (it == kv.end())
                throw std::runtime_error(path.string() + ": missing " + p + "." + field);
            return it->second;
        };
        stats[e].mu = get("mu");
        stats[e].sigma = get("sigma");
        stats[e].tau = get("tau");
        stats[e].shift = get("shift");
        stats[e].bandwidth = get("bandwidth");
        stats[e].alpha = get("alpha");
    }
    return stats;
}

void write_fused_csv(const std::filesystem::path& path,
                     std::span<const FusedVideo> videos) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_fused_csv: cannot open " + path.string());
    out << "video_id,frame,s,x_ffp,x_str,x_int,x_beh\n";
    for (const FusedVideo& v : videos) {
        for (size_t t = 0; t < v.fused.values.size(); ++t) {
            out << v.fused.video_id << ',' << t << ',' << io::format_double(v.fused.values[t]);
            for (size_t e = 0; e < 4; ++e) out << ',' << io::format_double(v.states[e][t]);
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write_fused_csv: write failed for " + path.string());
}

std::vector<FusedVideo> read_fused_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_fused_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "video_id,frame,s,x_ffp,x_str,x_int,x_beh")
        throw std::runtime_error(path.string() + ": unexpected header");
    std::vector<FusedVideo> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        {
            std::string cur;
            for (char c : line) {
                if (c == ',') {
                    f.push_back(cur);
                    cur.clear();
                } else {
                    cur.push_back(c);
                }
            }
            f.push_back(cur);
        }
        if (f.size() != 7)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 7 fields");
        if (out.empty() || out.back().fused.video_id != f[0]) {
            FusedVideo v;
            v.fused.video_id = f[0];
            out.push_back(std::move(v));
        }
        FusedVideo& v = out.back();
        const auto frame = std::stol(f[1]);
        if (frame != static_cast<long>(v.fused.values.size()))
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": missing frame " +
                                     std::to_string(v.fused.values.size()));
        v.fused.values.push_back(std::stod(f[2]));
        for (size_t e = 0; e < 4; ++e) v.states[e].push_back(std::stod(f[3 + e]));
    }
    if (out.empty()) throw std::runtime_error(path.string() + ": no data rows");
    return out;
}

} // namespace oread::fusion
