#include "m3t/fitting.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "m3t/errors.hpp"
#include "m3t/motion_io.hpp"
#include "m3t/ops.hpp"
#include "m3t/optim.hpp"

namespace m3t::fit {

using body::PoseParams;
using body::PoseTensors;

void Keypoints::validate() const {
    if (data.size() != frames * points * 3)
        throw DimensionError("keypoints hold " + std::to_string(data.size()) + " values, expected " +
                             std::to_string(frames * points * 3));
    for (std::size_t i = 0; i < frames * points; ++i) {
        Real c = data[i * 3 + 2];
        if (!(c >= 0.0 && c <= 1.0)) throw DataError("keypoint confidence outside [0, 1]");
        if (!std::isfinite(data[i * 3]) || !std::isfinite(data[i * 3 + 1]))
            throw DataError("non-finite keypoint coordinate");
    }
}

void FitProblem::validate() const {
    if (!model) throw UsageError("fit problem has no body model");
    if (frames() < 2) throw UsageError("fitting needs at least 2 frames");
    keypoints.validate();
    if (keypoints.frames != frames())
        throw UsageError("keypoints cover " + std::to_string(keypoints.frames) + " frames but " +
                         std::to_string(frames()) + " initial frames were given");
    if (!keypoint_joints.empty() && keypoint_joints.size() != keypoints.points)
        throw UsageError("keypoint joint map length differs from keypoint count");
    for (std::size_t k = 0; k < keypoints.points; ++k)
        if (joint_of(k) >= model->n_joints) throw UsageError("keypoint refers to a missing joint");
    if (!(camera.scale > 0.0) || !std::isfinite(camera.scale)) throw UsageError("camera scale must be positive");
    for (const auto& p : init_params) p.validate(*model);
}

Tensor project_orthographic(const Tensor& points, const Camera& camera) {
    if (points.rank() != 2 || points.dim(1) != 3)
        throw DimensionError("projection expects [K x 3] points, got " + shape_str(points.shape()));
    Tensor xy = scale(slice(points, 1, 0, 2), camera.scale);
    return add(xy, Tensor::from({1, 2}, {camera.u0, camera.v0}));
}

std::vector<Real> project_orthographic(std::span<const Real> points, const Camera& camera) {
    if (points.size() % 3 != 0) throw DimensionError("projection expects (x, y, z) triples");
    std::vector<Real> out;
    out.reserve(points.size() / 3 * 2);
    for (std::size_t i = 0; i < points.size(); i += 3) {
        out.push_back(camera.scale * points[i] + camera.u0);
        out.push_back(camera.scale * points[i + 1] + camera.v0);
    }
    return out;
}

std::vector<Tensor*> refined_fields(PoseTensors& p) {
    return {&p.theta_body, &p.theta_left, &p.theta_right, &p.global_rotation, &p.global_translation};
}

FitLossTerms fit_loss_terms(const FitProblem& problem, const std::vector<PoseTensors>& params) {
    problem.validate();
    const std::size_t F = problem.frames(), K = problem.keypoints.points;
    if (params.size() != F)
        throw UsageError("fit_loss got " + std::to_string(params.size()) + " frames, problem has " +
                         std::to_string(F));
    const auto& model = *problem.model;

    std::vector<std::size_t> joint_rows(K);
    for (std::size_t k = 0; k < K; ++k) joint_rows[k] = problem.joint_of(k);

    Tensor kp_sum = Tensor::scalar(0.0), reg_sum = Tensor::scalar(0.0);
    std::vector<Tensor> vertices(F);
    std::size_t reg_count = 0;
    for (std::size_t f = 0; f < F; ++f) {
        auto posed = body::lbs_forward_tensor(model, params[f]);
        vertices[f] = posed.vertices;
        if (K > 0) {
            std::vector<Real> target(K * 2), conf(K);
            for (std::size_t k = 0; k < K; ++k) {
                target[k * 2] = problem.keypoints.x(f, k);
                target[k * 2 + 1] = problem.keypoints.y(f, k);
                conf[k] = problem.keypoints.confidence(f, k);
            }
            Tensor proj = project_orthographic(gather_rows(posed.joints, joint_rows), problem.camera);
            Tensor err = sum_axis(square(sub(proj, Tensor::from({K, 2}, target))), 1);
            kp_sum = add(kp_sum, sum(mul(err, Tensor::from({K, 1}, conf))));
        }
        auto init = PoseTensors::from(problem.init_params[f], false);
        auto current = params[f];
        auto cur_fields = refined_fields(current);
        auto init_fields = refined_fields(init);
        for (std::size_t i = 0; i < cur_fields.size(); ++i) {
            reg_sum = add(reg_sum, sum(square(sub(*cur_fields[i], *init_fields[i]))));
            reg_count += cur_fields[i]->numel();
        }
    }

    Tensor acc_sum = Tensor::scalar(0.0);
    for (std::size_t f = 1; f + 1 < F; ++f) {
        Tensor second = add(sub(vertices[f + 1], scale(vertices[f], 2.0)), vertices[f - 1]);
        acc_sum = add(acc_sum, sum(square(second)));
    }

    FitLossTerms terms;
    terms.keypoint = K > 0 ? scale(kp_sum, 1.0 / static_cast<Real>(F * K)) : kp_sum;
    terms.acceleration = F >= 3 ? scale(acc_sum, 1.0 / static_cast<Real>((F - 2) * model.n_vertices)) : acc_sum;
    terms.regularization = scale(reg_sum, 1.0 / static_cast<Real>(reg_count));
    const auto& w = problem.weights;
    terms.total = add(add(scale(terms.keypoint, w.keypoint), scale(terms.acceleration, w.acceleration)),
                      scale(terms.regularization, w.regularization));
    return terms;
}

Tensor fit_loss(const FitProblem& problem, const std::vector<PoseTensors>& params) {
    return fit_loss_terms(problem, params).total;
}

Real fit_loss_value(const FitProblem& problem, const std::vector<PoseParams>& params) {
    std::vector<PoseTensors> t;
    t.reserve(params.size());
    for (const auto& p : params) t.push_back(PoseTensors::from(p, false));
    return fit_loss(problem, t).item();
}

FitResult refine_sequence(const FitProblem& problem, int steps, Real lr) {
    if (steps < 1) throw UsageError("refine_sequence needs at least one step");
    problem.validate();

    // Refined fields are trainable leaves; shape and face stay constant.
    std::vector<PoseTensors> params;
    std::vector<Tensor> leaves;
    for (const auto& p : problem.init_params) {
        auto t = PoseTensors::from(p, false);
        for (Tensor* field : refined_fields(t)) {
            *field = Tensor::from(field->shape(), field->to_vector(), true);
            leaves.push_back(*field);
        }
        params.push_back(t);
    }
    Adam opt(leaves, lr);

    FitResult result;
    result.trace.reserve(static_cast<std::size_t>(steps) + 1);
    for (int step = 0; step <= steps; ++step) {
        Tensor loss = fit_loss(problem, params);
        Real value = loss.item();
        if (!std::isfinite(value)) throw NumericError("fit loss is not finite at step " + std::to_string(step));
        result.trace.push_back(value);
        if (step == steps) break;
        opt.zero_grad();
        loss.backward();
        opt.step();
    }
    for (const auto& p : params) result.params.push_back(p.values());
    return result;
}

// --- keypoint files ----------------------------------------------------------

Keypoints parse_keypoints(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError("empty keypoint file", 1);
    Keypoints kp;
    {
        std::istringstream h(line);
        std::string magic, version, frames, points;
        h >> magic >> version >> frames >> points;
        if (magic != "m3t-keypoints" || version != "v1" || frames.rfind("frames=", 0) != 0 ||
            points.rfind("points=", 0) != 0)
            throw ParseError("expected header 'm3t-keypoints v1 frames=F points=K'", line_no);
        try {
            kp.frames = std::stoul(frames.substr(7));
            kp.points = std::stoul(points.substr(7));
        } catch (const std::exception&) {
            throw ParseError("bad frame or point count", line_no);
        }
    }
    kp.data.reserve(kp.frames * kp.points * 3);
    for (std::size_t f = 0; f < kp.frames; ++f) {
        if (!next_line()) throw ParseError("file ends after " + std::to_string(f) + " frames", line_no + 1);
        std::istringstream row(line);
        Real v;
        std::size_t count = 0;
        while (row >> v) {
            kp.data.push_back(v);
            ++count;
        }
        if (!row.eof() || count != kp.points * 3)
            throw ParseError("expected " + std::to_string(kp.points * 3) + " numbers", line_no);
    }
    if (next_line()) throw ParseError("unexpected trailing content", line_no);
    try {
        kp.validate();
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
    return kp;
}

std::string keypoints_to_string(const Keypoints& kp) {
    kp.validate();
    std::ostringstream out;
    out << "m3t-keypoints v1 frames=" << kp.frames << " points=" << kp.points << '\n';
    out << std::setprecision(17);
    for (std::size_t f = 0; f < kp.frames; ++f) {
        for (std::size_t i = 0; i < kp.points * 3; ++i) out << (i ? " " : "") << kp.data[f * kp.points * 3 + i];
        out << '\n';
    }
    return out.str();
}

Keypoints load_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open keypoint file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_keypoints(ss.str());
}

void save_keypoints(const Keypoints& kp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << keypoints_to_string(kp);
}

namespace {

struct NamedField {
    const char* name;
    std::vector<Real> body::PoseParams::*field;
};

constexpr NamedField kParamFields[] = {
    {"beta", &body::PoseParams::beta},
    {"theta_body", &body::PoseParams::theta_body},
    {"theta_left", &body::PoseParams::theta_left},
    {"theta_right", &body::PoseParams::theta_right},
    {"psi_face", &body::PoseParams::psi_face},
    {"global_rotation", &body::PoseParams::global_rotation},
    {"global_translation", &body::PoseParams::global_translation},
};

}  // namespace

std::string params_sequence_to_json(const std::vector<body::PoseParams>& frames) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : frames) {
        nlohmann::json f = nlohmann::json::object();
        for (const auto& nf : kParamFields) f[nf.name] = p.*(nf.field);
        arr.push_back(std::move(f));
    }
    nlohmann::json j = {{"format", "m3t-params"}, {"version", 1}, {"frames", std::move(arr)}};
    return j.dump(1);
}

std::vector<body::PoseParams> parse_params_sequence(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(text);
        if (j.value("format", "") != "m3t-params") throw ParseError("not an m3t-params document");
        if (j.at("version").get<int>() != 1) throw ParseError("unsupported m3t-params version");
        std::vector<body::PoseParams> out;
        for (const auto& f : j.at("frames")) {
            body::PoseParams p;
            for (const auto& nf : kParamFields) p.*(nf.field) = f.at(nf.name).get<std::vector<Real>>();
            out.push_back(std::move(p));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed m3t-params document: ") + e.what());
    }
}

std::vector<body::PoseParams> load_params_sequence(const std::string& path) {
    return parse_params_sequence(read_file(path));
}

void save_params_sequence(const std::vector<body::PoseParams>& frames, const std::string& path) {
    write_file(path, params_sequence_to_json(frames));
}

}  // namespace m3t::fit
