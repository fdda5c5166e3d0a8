#include "m3t/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "m3t/errors.hpp"

namespace m3t::metrics {

void JointSequence::validate() const {
    if (frames == 0 || points == 0) throw UsageError("joint sequence is empty");
    if (data.size() != frames * points * 3) throw DimensionError("joint sequence data must be T x N x 3");
    for (Real v : data)
        if (!std::isfinite(v)) throw NumericError("joint sequence holds non-finite values");
}

DtwResult dtw(std::size_t n, std::size_t m, const std::function<Real(std::size_t, std::size_t)>& frame_dist) {
    if (n == 0 || m == 0) throw UsageError("dtw needs two non-empty sequences");
    constexpr Real inf = std::numeric_limits<Real>::infinity();
    std::vector<Real> acc((n + 1) * (m + 1), inf);
    auto A = [&](std::size_t i, std::size_t j) -> Real& { return acc[i * (m + 1) + j]; };
    A(0, 0) = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            A(i, j) = frame_dist(i - 1, j - 1) + std::min({A(i - 1, j - 1), A(i - 1, j), A(i, j - 1)});

    DtwResult r;
    r.cost = A(n, m);
    std::size_t i = n, j = m;
    while (true) {
        r.path.emplace_back(i - 1, j - 1);
        if (i == 1 && j == 1) break;
        Real diag = A(i - 1, j - 1), up = A(i - 1, j), left = A(i, j - 1);
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(r.path.begin(), r.path.end());
    return r;
}

DtwResult dtw(std::span<const Real> a, std::span<const Real> b) {
    return dtw(a.size(), b.size(), [&](std::size_t i, std::size_t j) { return std::abs(a[i] - b[j]); });
}

Real mean_point_distance(std::span<const Real> a, std::span<const Real> b) {
    if (a.size() != b.size() || a.size() % 3 != 0) throw DimensionError("point sets differ in size");
    Real total = 0.0;
    for (std::size_t p = 0; p < a.size(); p += 3) {
        Real dx = a[p] - b[p], dy = a[p + 1] - b[p + 1], dz = a[p + 2] - b[p + 2];
        total += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return total / static_cast<Real>(a.size() / 3);
}

DtwResult dtw(const JointSequence& a, const JointSequence& b) {
    a.validate();
    b.validate();
    if (a.points != b.points)
        throw UsageError("joint counts differ: " + std::to_string(a.points) + " vs " + std::to_string(b.points));
    return dtw(a.frames, b.frames,
               [&](std::size_t i, std::size_t j) { return mean_point_distance(a.frame(i), b.frame(j)); });
}

bool is_valid_path(const AlignmentPath& path, std::size_t n, std::size_t m) {
    if (path.empty() || path.front() != std::pair<std::size_t, std::size_t>{0, 0} ||
        path.back() != std::pair<std::size_t, std::size_t>{n - 1, m - 1})
        return false;
    for (std::size_t k = 1; k < path.size(); ++k) {
        std::size_t di = path[k].first - path[k - 1].first, dj = path[k].second - path[k - 1].second;
        if (path[k].first < path[k - 1].first || path[k].second < path[k - 1].second) return false;
        if (di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
    }
    return true;
}

Procrustes procrustes_align(std::span<const Real> x, std::span<const Real> y) {
    if (x.size() != y.size() || x.size() % 3 != 0) throw DimensionError("procrustes needs equal N x 3 point sets");
    const std::size_t N = x.size() / 3;
    if (N < 3) throw NumericError("procrustes needs at least 3 points");
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor>;
    Eigen::Map<const Mat> X(x.data(), static_cast<Eigen::Index>(N), 3), Y(y.data(), static_cast<Eigen::Index>(N), 3);
    Eigen::RowVector3d mx = X.colwise().mean(), my = Y.colwise().mean();
    Mat Xc = X.rowwise() - mx, Yc = Y.rowwise() - my;

    auto collinear = [](const Mat& P) {
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(P.transpose() * P);
        auto s = svd.singularValues();
        return s(0) == 0.0 || s(1) <= 1e-12 * s(0);  // eigenvalues of P^T P: squared spreads
    };
    if (collinear(Xc) || collinear(Yc)) throw NumericError("procrustes point set is degenerate (collinear)");

    // Identical sets align exactly; the SVD path would leave roundoff.
    if (std::equal(x.begin(), x.end(), y.begin())) {
        Procrustes same;
        same.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        same.aligned.assign(x.begin(), x.end());
        return same;
    }

    Eigen::Matrix3d H = Xc.transpose() * Yc;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d U = svd.matrixU(), V = svd.matrixV();
    Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
    if ((V * U.transpose()).determinant() < 0) D(2, 2) = -1.0;
    Eigen::Matrix3d R = V * D * U.transpose();
    Eigen::Vector3d t = my.transpose() - R * mx.transpose();

    Procrustes out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) out.rotation[r * 3 + c] = R(r, c);
        out.translation[r] = t(r);
    }
    out.aligned.resize(x.size());
    Real sq = 0.0;
    for (std::size_t p = 0; p < N; ++p) {
        Eigen::Vector3d v = R * X.row(static_cast<Eigen::Index>(p)).transpose() + t;
        for (int c = 0; c < 3; ++c) {
            out.aligned[p * 3 + c] = v(c);
            Real d = v(c) - y[p * 3 + c];
            sq += d * d;
        }
    }
    out.residual = std::sqrt(sq / static_cast<Real>(N));
    return out;
}

namespace {

Real path_error(const JointSequence& pred, const JointSequence& gt, const AlignmentPath& path, Alignment align) {
    Real total = 0.0;
    for (const auto& [i, j] : path) {
        auto p = pred.frame(i), g = gt.frame(j);
        if (align == Alignment::procrustes) {
            auto pa = procrustes_align(p, g);
            total += mean_point_distance(pa.aligned, g);
        } else {
            total += mean_point_distance(p, g);
        }
    }
    return total / static_cast<Real>(path.size());
}

JointSequence restrict(const JointSequence& s, const std::vector<std::size_t>& region) {
    JointSequence out;
    out.frames = s.frames;
    out.points = region.size();
    out.data.reserve(s.frames * region.size() * 3);
    for (std::size_t t = 0; t < s.frames; ++t)
        for (auto v : region) {
            if (v >= s.points) throw UsageError("region vertex index out of range");
            for (int c = 0; c < 3; ++c) out.data.push_back(s.data[(t * s.points + v) * 3 + c]);
        }
    return out;
}

}  // namespace

Real dtw_jpe(const JointSequence& pred, const JointSequence& gt, Alignment align) {
    auto r = dtw(pred, gt);
    return path_error(pred, gt, r.path, align);
}

Real dtw_vpe(const JointSequence& pred, const JointSequence& gt, Alignment align,
             const std::vector<std::size_t>& region) {
    if (region.empty()) return dtw_jpe(pred, gt, align);
    return dtw_jpe(restrict(pred, region), restrict(gt, region), align);
}

Sentence tokenize_words(const std::string& text) {
    std::istringstream in(text);
    Sentence out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

namespace {

void check_corpus(const std::vector<Sentence>& hyp, const std::vector<Sentence>& ref) {
    if (hyp.empty() || ref.empty()) throw UsageError("empty corpus");
    if (hyp.size() != ref.size())
        throw UsageError("corpus sizes differ: " + std::to_string(hyp.size()) + " hypotheses vs " +
                         std::to_string(ref.size()) + " references");
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
    return counts;
}

}  // namespace

Real bleu4(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
           const BleuOptions& options) {
    check_corpus(hypotheses, references);
    if (options.max_order < 1) throw UsageError("BLEU order must be positive");
    const auto N = static_cast<std::size_t>(options.max_order);
    std::vector<Real> matches(N, 0.0), totals(N, 0.0);
    std::size_t hyp_len = 0, ref_len = 0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        hyp_len += hypotheses[s].size();
        ref_len += references[s].size();
        for (std::size_t n = 1; n <= N; ++n) {
            auto h = ngram_counts(hypotheses[s], n), r = ngram_counts(references[s], n);
            for (const auto& [gram, count] : h) {
                auto it = r.find(gram);
                matches[n - 1] += static_cast<Real>(std::min(count, it == r.end() ? 0 : it->second));
                totals[n - 1] += static_cast<Real>(count);
            }
        }
    }
    if (hyp_len == 0) return 0.0;
    Real log_sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        Real m = matches[n], t = totals[n];
        if (m == 0.0) {
            if (!options.add_one_smoothing) return 0.0;
            m += 1.0;
            t += 1.0;
        }
        log_sum += std::log(m / t);
    }
    Real bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<Real>(ref_len) / static_cast<Real>(hyp_len));
    return bp * std::exp(log_sum / static_cast<Real>(N));
}

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

Real rouge_l(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
             const RougeOptions& options) {
    check_corpus(hypotheses, references);
    Real total = 0.0;
    for (std::size_t s = 0; s < hypotheses.size(); ++s) {
        const auto& h = hypotheses[s];
        const auto& r = references[s];
        auto lcs = static_cast<Real>(lcs_length(h, r));
        if (lcs == 0.0) continue;
        Real p = lcs / static_cast<Real>(h.size()), rec = lcs / static_cast<Real>(r.size());
        Real b2 = options.beta_squared;
        total += (1.0 + b2) * p * rec / (rec + b2 * p);
    }
    return total / static_cast<Real>(hypotheses.size());
}

std::string metric_report_json(const MetricReport& report) {
    nlohmann::ordered_json doc;
    doc["format"] = "m3t-metrics";
    doc["version"] = 1;
    nlohmann::ordered_json seqs = nlohmann::ordered_json::array();
    for (const auto& s : report.sequences) seqs.push_back(s);
    doc["sequences"] = seqs;
    doc["corpus"] = report.corpus;
    return doc.dump(2);
}

}  // namespace m3t::metrics
