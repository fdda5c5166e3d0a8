#include "m3t/bodymodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "m3t/errors.hpp"
#include "m3t/ops.hpp"

namespace m3t::body {

namespace {

constexpr std::array<Real, 6> kIdentity6d{1, 0, 0, 0, 1, 0};
constexpr Real kDegenerate = 1e-9;

void require_size(const std::vector<Real>& v, std::size_t n, const char* what) {
    if (v.size() != n)
        throw UsageError(std::string(what) + " has " + std::to_string(v.size()) + " values, expected " +
                         std::to_string(n));
}

}  // namespace

std::string JointSource::to_string() const {
    switch (kind) {
        case Kind::root: return "root";
        case Kind::body: return "body:" + std::to_string(index);
        case Kind::left_hand: return "left:" + std::to_string(index);
        case Kind::right_hand: return "right:" + std::to_string(index);
        case Kind::jaw: return "jaw";
        case Kind::fixed: return "fixed";
    }
    return "fixed";
}

JointSource JointSource::parse(const std::string& text) {
    if (text == "root") return {Kind::root, 0};
    if (text == "jaw") return {Kind::jaw, 0};
    if (text == "fixed") return {Kind::fixed, 0};
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        std::string head = text.substr(0, colon);
        std::size_t idx = 0;
        try {
            std::size_t used = 0;
            idx = std::stoul(text.substr(colon + 1), &used);
            if (used != text.size() - colon - 1) throw std::invalid_argument(text);
        } catch (const std::exception&) {
            throw ParseError("bad joint source '" + text + "'");
        }
        if (head == "body") return {Kind::body, idx};
        if (head == "left") return {Kind::left_hand, idx};
        if (head == "right") return {Kind::right_hand, idx};
    }
    throw ParseError("bad joint source '" + text + "'");
}

// --- rotations ---------------------------------------------------------------

Mat3 rot6d_to_matrix(std::span<const Real> r6) {
    if (r6.size() != 6) throw DimensionError("6D rotation needs 6 values, got " + std::to_string(r6.size()));
    const Real* a1 = r6.data();
    const Real* a2 = r6.data() + 3;
    Real n1 = std::sqrt(a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]);
    if (!(n1 > kDegenerate)) throw NumericError("degenerate 6D rotation: zero first column");
    Real b1[3] = {a1[0] / n1, a1[1] / n1, a1[2] / n1};
    Real dot = b1[0] * a2[0] + b1[1] * a2[1] + b1[2] * a2[2];
    Real u[3] = {a2[0] - dot * b1[0], a2[1] - dot * b1[1], a2[2] - dot * b1[2]};
    Real n2 = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    if (!(n2 > kDegenerate)) throw NumericError("degenerate 6D rotation: parallel columns");
    Real b2[3] = {u[0] / n2, u[1] / n2, u[2] / n2};
    Real b3[3] = {b1[1] * b2[2] - b1[2] * b2[1], b1[2] * b2[0] - b1[0] * b2[2], b1[0] * b2[1] - b1[1] * b2[0]};
    return {b1[0], b2[0], b3[0], b1[1], b2[1], b3[1], b1[2], b2[2], b3[2]};
}

std::array<Real, 6> matrix_to_rot6d(const Mat3& R) { return {R[0], R[3], R[6], R[1], R[4], R[7]}; }

Tensor rot6d_to_matrix_tensor(const Tensor& r6) {
    if (r6.rank() != 2 || r6.dim(1) != 6)
        throw DimensionError("rot6d tensor must be [J x 6], got " + shape_str(r6.shape()));
    const std::size_t J = r6.dim(0);
    auto v = r6.data();
    for (std::size_t j = 0; j < J; ++j) rot6d_to_matrix(v.subspan(6 * j, 6));  // degeneracy check

    Tensor a1 = slice(r6, 1, 0, 3);
    Tensor a2 = slice(r6, 1, 3, 3);
    Tensor b1 = div(a1, sqrt(sum_axis(square(a1), 1)));
    Tensor u = sub(a2, mul(sum_axis(mul(b1, a2), 1), b1));
    Tensor b2 = div(u, sqrt(sum_axis(square(u), 1)));
    auto col = [](const Tensor& t, std::size_t i) { return slice(t, 1, i, 1); };
    Tensor b3 = concat({sub(mul(col(b1, 1), col(b2, 2)), mul(col(b1, 2), col(b2, 1))),
                        sub(mul(col(b1, 2), col(b2, 0)), mul(col(b1, 0), col(b2, 2))),
                        sub(mul(col(b1, 0), col(b2, 1)), mul(col(b1, 1), col(b2, 0)))},
                       1);
    // Rows of the concatenation are the columns of R.
    return transpose(reshape(concat({b1, b2, b3}, 1), {J, 3, 3}));
}

std::vector<Real> mirror_hand_pose(std::span<const Real> theta) {
    if (theta.size() != kHandJoints * 6)
        throw DimensionError("hand pose needs " + std::to_string(kHandJoints * 6) + " values");
    // M R M with M = diag(-1,1,1): first column -> (x,-y,-z), second -> (-x,y,z).
    // Gram-Schmidt commutes with this sign pattern, so it is applied to raw 6D.
    std::vector<Real> out(theta.begin(), theta.end());
    for (std::size_t j = 0; j < kHandJoints; ++j) {
        rot6d_to_matrix(theta.subspan(6 * j, 6));
        Real* r = out.data() + 6 * j;
        r[1] = -r[1];
        r[2] = -r[2];
        r[3] = -r[3];
    }
    return out;
}

std::vector<Real> mirror_hand_sequence(std::span<const Real> frames, std::size_t n_frames) {
    const std::size_t D = kHandJoints * 6;
    if (frames.size() != n_frames * D) throw DimensionError("hand sequence must be T x 90");
    std::vector<Real> out;
    out.reserve(frames.size());
    for (std::size_t t = 0; t < n_frames; ++t) {
        auto m = mirror_hand_pose(frames.subspan(t * D, D));
        out.insert(out.end(), m.begin(), m.end());
    }
    return out;
}

// --- model -------------------------------------------------------------------

void BodyModel::validate() const {
    auto fail = [](const std::string& what) { throw ModelError(what); };
    const std::size_t V = n_vertices, J = n_joints;
    if (V == 0 || J == 0) fail("model has no vertices or joints");
    if (template_vertices.size() != V * 3) fail("template extent");
    if (n_face_shape > n_shape) fail("face shape components exceed shape dimension");
    if (n_expression > kExpressionDims) fail("more than 100 expression directions");
    if (shape_dirs.size() != V * 3 * n_shape) fail("shape_dirs extent");
    if (pose_dirs.size() != V * 3 * n_pose_basis()) fail("pose_dirs extent");
    if (expr_dirs.size() != V * 3 * n_expression) fail("expr_dirs extent");
    if (eyelid_dirs.size() != V * 3 * kEyelidDims) fail("eyelid_dirs extent");
    if (joint_regressor.size() != J * V) fail("joint_regressor extent");
    if (blend_weights.size() != V * J) fail("blend_weights extent");
    if (!face_blend_weights.empty() && face_blend_weights.size() != V * J) fail("face_blend_weights extent");
    if (parents.size() != J || joint_sources.size() != J) fail("parents / joint map extent");

    auto check_rows = [&](const std::vector<Real>& w, const std::string& name) {
        for (std::size_t v = 0; v < V; ++v) {
            Real s = 0;
            for (std::size_t j = 0; j < J; ++j) {
                Real x = w[v * J + j];
                if (!std::isfinite(x) || x < 0) fail(name + " nonnegative (vertex " + std::to_string(v) + ")");
                s += x;
            }
            if (std::abs(s - 1.0) > 1e-6) fail(name + " row sum (vertex " + std::to_string(v) + ")");
        }
    };
    check_rows(blend_weights, "blend weights");
    if (!face_blend_weights.empty()) check_rows(face_blend_weights, "face blend weights");

    if (parents[0] != -1) fail("parents tree: joint 0 must be the root");
    for (std::size_t j = 1; j < J; ++j) {
        if (parents[j] < 0 || static_cast<std::size_t>(parents[j]) >= J)
            fail("parents tree: joint " + std::to_string(j) + " has no valid parent");
        // Walking up must reach the root within J steps.
        std::size_t steps = 0;
        for (int p = static_cast<int>(j); p != 0; p = parents[p])
            if (++steps > J) fail("parents tree: cycle through joint " + std::to_string(j));
    }

    if (joint_sources[0].kind != JointSource::Kind::root) fail("joint map: joint 0 must be root");
    for (std::size_t j = 0; j < J; ++j) {
        const auto& s = joint_sources[j];
        if (j > 0 && s.kind == JointSource::Kind::root) fail("joint map: multiple roots");
        if (s.kind == JointSource::Kind::body && s.index >= kBodyJoints) fail("joint map: body index");
        if ((s.kind == JointSource::Kind::left_hand || s.kind == JointSource::Kind::right_hand) &&
            s.index >= kHandJoints)
            fail("joint map: hand index");
        if (s.kind != JointSource::Kind::fixed)
            for (std::size_t k = 0; k < j; ++k)
                if (joint_sources[k] == s) fail("joint map: duplicate source " + s.to_string());
    }

    for (const auto& [v, r] : neck_ring) {
        if (v >= V) fail("neck ring vertex index");
        if (!(r >= 0.1 && r <= 0.9)) fail("neck ring ratio range");
    }
    for (const auto& [v, j] : teeth)
        if (v >= V || j >= J) fail("teeth index");
    for (auto v : face_vertices)
        if (v >= V) fail("face vertex index");
}

void BodyModel::confine_face_shape() {
    std::vector<char> is_face(n_vertices, 0);
    for (auto v : face_vertices) is_face.at(v) = 1;
    for (std::size_t v = 0; v < n_vertices; ++v)
        for (std::size_t c = 0; c < 3; ++c) {
            Real* row = shape_dirs.data() + (v * 3 + c) * n_shape;
            for (std::size_t s = 0; s < n_shape; ++s)
                if ((s < n_face_shape) != static_cast<bool>(is_face[v])) row[s] = 0.0;
        }
}

std::vector<Real> BodyModel::effective_weights() const {
    std::vector<Real> w = blend_weights;
    const std::size_t J = n_joints;
    if (!face_blend_weights.empty())
        for (const auto& [v, r] : neck_ring)
            for (std::size_t j = 0; j < J; ++j)
                w[v * J + j] = r * blend_weights[v * J + j] + (1.0 - r) * face_blend_weights[v * J + j];
    for (const auto& [v, joint] : teeth)
        for (std::size_t j = 0; j < J; ++j) w[v * J + j] = (j == joint) ? 1.0 : 0.0;
    return w;
}

std::size_t BodyModel::joint_for(JointSource::Kind kind, std::size_t index) const {
    for (std::size_t j = 0; j < n_joints; ++j)
        if (joint_sources[j].kind == kind && (joint_sources[j].index == index || kind == JointSource::Kind::root ||
                                              kind == JointSource::Kind::jaw))
            return j;
    throw UsageError("model has no joint " + JointSource{kind, index}.to_string());
}

// --- parameters --------------------------------------------------------------

PoseParams PoseParams::identity(std::size_t n_shape) {
    PoseParams p;
    p.beta.assign(n_shape, 0.0);
    auto tile = [](std::size_t n) {
        std::vector<Real> out;
        for (std::size_t i = 0; i < n; ++i) out.insert(out.end(), kIdentity6d.begin(), kIdentity6d.end());
        return out;
    };
    p.theta_body = tile(kBodyJoints);
    p.theta_left = tile(kHandJoints);
    p.theta_right = tile(kHandJoints);
    p.psi_face.assign(kFaceDims, 0.0);
    std::copy(kIdentity6d.begin(), kIdentity6d.end(), p.psi_face.begin() + kExpressionDims + kEyelidDims);
    p.global_rotation.assign(kIdentity6d.begin(), kIdentity6d.end());
    p.global_translation.assign(3, 0.0);
    return p;
}

void PoseParams::validate(const BodyModel& model) const {
    require_size(beta, model.n_shape, "beta");
    require_size(theta_body, kBodyJoints * 6, "theta_body");
    require_size(theta_left, kHandJoints * 6, "theta_left");
    require_size(theta_right, kHandJoints * 6, "theta_right");
    require_size(psi_face, kFaceDims, "psi_face");
    require_size(global_rotation, 6, "global_rotation");
    require_size(global_translation, 3, "global_translation");
}

PoseTensors PoseTensors::from(const PoseParams& p, bool requires_grad) {
    // Empty blocks (a model without shape components) stay undefined.
    auto t = [&](const std::vector<Real>& v) {
        return v.empty() ? Tensor() : Tensor::from({v.size()}, v, requires_grad);
    };
    return {t(p.beta),           t(p.theta_body),      t(p.theta_left), t(p.theta_right),
            t(p.psi_face),       t(p.global_rotation), t(p.global_translation)};
}

PoseParams PoseTensors::values() const {
    auto v = [](const Tensor& t) { return t.defined() ? t.to_vector() : std::vector<Real>{}; };
    return {v(beta),     v(theta_body),      v(theta_left),        v(theta_right),
            v(psi_face), v(global_rotation), v(global_translation)};
}

// --- forward -----------------------------------------------------------------

namespace {

// Columns [start, start+n) of a row-major (rows x cols) matrix.
Tensor column_block(const std::vector<Real>& m, std::size_t rows, std::size_t cols, std::size_t start,
                    std::size_t n) {
    std::vector<Real> out(rows * n);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(m.begin() + r * cols + start, n, out.begin() + r * n);
    return Tensor::from({rows, n}, std::move(out));
}

// dirs [(V*3) x n] times coeffs [n] -> [V x 3].
Tensor apply_basis(const Tensor& dirs, const Tensor& coeffs, std::size_t V) {
    return reshape(matmul(dirs, reshape(coeffs, {coeffs.numel(), 1})), {V, 3});
}

void check_dims(const BodyModel& model, const PoseTensors& p) {
    auto need = [](const Tensor& t, std::size_t n, const char* what) {
        if ((t.defined() ? t.numel() : 0) != n)
            throw UsageError(std::string(what) + " has wrong dimension, expected " + std::to_string(n));
    };
    need(p.beta, model.n_shape, "beta");
    need(p.theta_body, kBodyJoints * 6, "theta_body");
    need(p.theta_left, kHandJoints * 6, "theta_left");
    need(p.theta_right, kHandJoints * 6, "theta_right");
    need(p.psi_face, kFaceDims, "psi_face");
    need(p.global_rotation, 6, "global_rotation");
    need(p.global_translation, 3, "global_translation");
}

struct Shaped {
    Tensor vertices;  // before pose blendshapes
    Tensor local_rotations;  // [J x 3 x 3]
};

Shaped shape_and_rotations(const BodyModel& model, const PoseTensors& p) {
    const std::size_t V = model.n_vertices, J = model.n_joints, S = model.n_shape, F = model.n_face_shape;
    Tensor v = Tensor::from({V, 3}, model.template_vertices);
    if (F > 0)
        v = add(v, apply_basis(column_block(model.shape_dirs, V * 3, S, 0, F), slice(p.beta, 0, 0, F), V));
    if (model.n_expression > 0)
        v = add(v, apply_basis(Tensor::from({V * 3, model.n_expression}, model.expr_dirs),
                               slice(p.psi_face, 0, 0, model.n_expression), V));
    v = add(v, apply_basis(Tensor::from({V * 3, kEyelidDims}, model.eyelid_dirs),
                           slice(p.psi_face, 0, kExpressionDims, kEyelidDims), V));
    if (S > F)
        v = add(v, apply_basis(column_block(model.shape_dirs, V * 3, S, F, S - F), slice(p.beta, 0, F, S - F), V));

    Tensor body = reshape(p.theta_body, {kBodyJoints, 6});
    Tensor left = reshape(p.theta_left, {kHandJoints, 6});
    Tensor right = reshape(p.theta_right, {kHandJoints, 6});
    Tensor identity = Tensor::from({1, 6}, std::vector<Real>(kIdentity6d.begin(), kIdentity6d.end()));
    std::vector<Tensor> rows;
    rows.reserve(J);
    for (const auto& s : model.joint_sources) {
        switch (s.kind) {
            case JointSource::Kind::root: rows.push_back(reshape(p.global_rotation, {1, 6})); break;
            case JointSource::Kind::body: rows.push_back(slice(body, 0, s.index, 1)); break;
            case JointSource::Kind::left_hand: rows.push_back(slice(left, 0, s.index, 1)); break;
            case JointSource::Kind::right_hand: rows.push_back(slice(right, 0, s.index, 1)); break;
            case JointSource::Kind::jaw:
                rows.push_back(reshape(slice(p.psi_face, 0, kExpressionDims + kEyelidDims, 6), {1, 6}));
                break;
            case JointSource::Kind::fixed: rows.push_back(identity); break;
        }
    }
    return {v, rot6d_to_matrix_tensor(concat(rows, 0))};
}

Tensor eye3() { return Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}); }

Tensor pose_blend(const BodyModel& model, const Tensor& local) {
    const std::size_t J = model.n_joints;
    if (J < 2) return Tensor();
    Tensor rel = sub(slice(local, 0, 1, J - 1), reshape(eye3(), {1, 3, 3}));
    return apply_basis(Tensor::from({model.n_vertices * 3, model.n_pose_basis()}, model.pose_dirs),
                       reshape(rel, {9 * (J - 1)}), model.n_vertices);
}

std::vector<std::size_t> topological_order(const BodyModel& model) {
    std::vector<std::size_t> order{0};
    std::vector<char> done(model.n_joints, 0);
    done[0] = 1;
    while (order.size() < model.n_joints) {
        std::size_t before = order.size();
        for (std::size_t j = 1; j < model.n_joints; ++j)
            if (!done[j] && done[model.parents[j]]) {
                order.push_back(j);
                done[j] = 1;
            }
        if (order.size() == before) throw ModelError("parents tree: unreachable joints");
    }
    return order;
}

}  // namespace

std::vector<Real> rest_pose_mesh(const BodyModel& model, const PoseParams& params) {
    params.validate(model);
    auto p = PoseTensors::from(params, false);
    auto shaped = shape_and_rotations(model, p);
    Tensor blend = pose_blend(model, shaped.local_rotations);
    return (blend.defined() ? add(shaped.vertices, blend) : shaped.vertices).to_vector();
}

LbsTensors lbs_forward_tensor(const BodyModel& model, const PoseTensors& p) {
    check_dims(model, p);
    const std::size_t V = model.n_vertices, J = model.n_joints;
    for (std::size_t j = 1; j < J; ++j)
        if (model.parents[j] < 0 || static_cast<std::size_t>(model.parents[j]) >= J)
            throw ModelError("parents tree: joint " + std::to_string(j) + " has no valid parent");
    auto order = topological_order(model);

    auto shaped = shape_and_rotations(model, p);
    Tensor joints = matmul(Tensor::from({J, V}, model.joint_regressor), shaped.vertices);  // [J x 3]
    Tensor blend = pose_blend(model, shaped.local_rotations);
    Tensor rest = blend.defined() ? add(shaped.vertices, blend) : shaped.vertices;

    // Displacement form: G_j(v) = v + (v - J_j) A_j + d_j with A_j = (R_j^world - I)^T
    // and d_j the world displacement of joint j. Identity rotations give exact zeros.
    std::vector<Tensor> world(J), A(J), d(J), jrow(J);
    const Tensor I = eye3();
    for (std::size_t j : order) {
        jrow[j] = slice(joints, 0, j, 1);
        Tensor local = reshape(slice(shaped.local_rotations, 0, j, 1), {3, 3});
        if (j == 0) {
            world[j] = local;
            d[j] = Tensor::zeros({1, 3});
        } else {
            auto par = static_cast<std::size_t>(model.parents[j]);
            world[j] = matmul(world[par], local);
            d[j] = add(matmul(sub(jrow[j], jrow[par]), A[par]), d[par]);
        }
        A[j] = transpose(sub(world[j], I));
    }
    std::vector<Tensor> offsets(J);
    for (std::size_t j = 0; j < J; ++j) offsets[j] = sub(d[j], matmul(jrow[j], A[j]));

    auto w = model.effective_weights();
    Tensor W = Tensor::from({V, J}, w);
    Tensor rotated = reshape(matmul(rest, concat(A, 1)), {V, J, 3});
    Tensor spin = sum_axis(mul(rotated, reshape(W, {V, J, 1})), 1, false);
    Tensor trans = reshape(p.global_translation, {1, 3});
    Tensor vertices = add(add(add(rest, spin), matmul(W, concat(offsets, 0))), trans);
    Tensor posed_joints = add(add(joints, concat(d, 0)), trans);
    return {rest, vertices, posed_joints};
}

LbsResult lbs_forward(const BodyModel& model, const PoseParams& params) {
    params.validate(model);
    auto out = lbs_forward_tensor(model, PoseTensors::from(params, false));
    return {out.vertices.to_vector(), out.joints.to_vector()};
}

// --- serialization -----------------------------------------------------------

namespace {

using nlohmann::json;

json array_field(const std::vector<Real>& data, Shape extents) {
    return json{{"shape", extents}, {"data", data}};
}

std::vector<Real> read_array(const json& doc, const char* key, const Shape& expected) {
    if (!doc.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
    const json& f = doc.at(key);
    Shape extents = f.at("shape").get<Shape>();
    auto data = f.at("data").get<std::vector<Real>>();
    if (extents != expected)
        throw LoadError(std::string(key) + " extents " + shape_str(extents) + " do not match " +
                        shape_str(expected));
    if (data.size() != shape_numel(extents))
        throw LoadError(std::string(key) + " declares " + std::to_string(shape_numel(extents)) +
                        " values but holds " + std::to_string(data.size()));
    return data;
}

}  // namespace

std::string body_model_to_string(const BodyModel& m) {
    const std::size_t V = m.n_vertices, J = m.n_joints;
    json doc;
    doc["format"] = "m3t-body-model";
    doc["version"] = 1;
    doc["n_vertices"] = V;
    doc["n_joints"] = J;
    doc["n_shape"] = m.n_shape;
    doc["n_face_shape"] = m.n_face_shape;
    doc["n_expression"] = m.n_expression;
    doc["template"] = array_field(m.template_vertices, {V, 3});
    doc["shape_dirs"] = array_field(m.shape_dirs, {V, 3, m.n_shape});
    doc["pose_dirs"] = array_field(m.pose_dirs, {V, 3, m.n_pose_basis()});
    doc["expr_dirs"] = array_field(m.expr_dirs, {V, 3, m.n_expression});
    doc["eyelid_dirs"] = array_field(m.eyelid_dirs, {V, 3, kEyelidDims});
    doc["joint_regressor"] = array_field(m.joint_regressor, {J, V});
    doc["blend_weights"] = array_field(m.blend_weights, {V, J});
    if (!m.face_blend_weights.empty()) doc["face_blend_weights"] = array_field(m.face_blend_weights, {V, J});
    doc["parents"] = m.parents;
    std::vector<std::string> sources;
    for (const auto& s : m.joint_sources) sources.push_back(s.to_string());
    doc["joint_map"] = sources;
    json ring = json::array();
    for (const auto& [v, r] : m.neck_ring) ring.push_back(json{v, r});
    doc["neck_ring"] = ring;
    json tv = json::array(), tj = json::array();
    for (const auto& [v, j] : m.teeth) {
        tv.push_back(v);
        tj.push_back(j);
    }
    doc["teeth"] = json{{"vertices", tv}, {"joints", tj}};
    doc["face_region"] = m.face_vertices;
    return doc.dump(1);
}

BodyModel parse_body_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("body model: ") + e.what());
    }
    BodyModel m;
    try {
        if (doc.value("format", std::string()) != "m3t-body-model") throw ParseError("not an m3t body model");
        if (doc.value("version", 0) != 1) throw ParseError("unsupported body model version");
        m.n_vertices = doc.at("n_vertices").get<std::size_t>();
        m.n_joints = doc.at("n_joints").get<std::size_t>();
        m.n_shape = doc.at("n_shape").get<std::size_t>();
        m.n_face_shape = doc.value("n_face_shape", std::size_t{0});
        m.n_expression = doc.at("n_expression").get<std::size_t>();
        const std::size_t V = m.n_vertices, J = m.n_joints;
        if (J == 0) throw LoadError("model has no joints");
        m.template_vertices = read_array(doc, "template", {V, 3});
        m.shape_dirs = read_array(doc, "shape_dirs", {V, 3, m.n_shape});
        m.pose_dirs = read_array(doc, "pose_dirs", {V, 3, m.n_pose_basis()});
        m.expr_dirs = read_array(doc, "expr_dirs", {V, 3, m.n_expression});
        m.eyelid_dirs = read_array(doc, "eyelid_dirs", {V, 3, kEyelidDims});
        m.joint_regressor = read_array(doc, "joint_regressor", {J, V});
        m.blend_weights = read_array(doc, "blend_weights", {V, J});
        if (doc.contains("face_blend_weights")) m.face_blend_weights = read_array(doc, "face_blend_weights", {V, J});
        m.parents = doc.at("parents").get<std::vector<int>>();
        for (const auto& s : doc.at("joint_map")) m.joint_sources.push_back(JointSource::parse(s.get<std::string>()));
        for (const auto& pair : doc.at("neck_ring"))
            m.neck_ring.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<Real>());
        const json& teeth = doc.at("teeth");
        auto tv = teeth.at("vertices").get<std::vector<std::size_t>>();
        auto tj = teeth.at("joints").get<std::vector<std::size_t>>();
        if (tv.size() != tj.size()) throw LoadError("teeth vertex and joint lists differ in length");
        for (std::size_t i = 0; i < tv.size(); ++i) m.teeth.emplace_back(tv[i], tj[i]);
        m.face_vertices = doc.value("face_region", std::vector<std::size_t>{});
    } catch (const json::exception& e) {
        throw ParseError(std::string("body model: ") + e.what());
    }
    try {
        m.validate();
    } catch (const ModelError& e) {
        throw LoadError(e.what());
    }
    return m;
}

BodyModel load_body_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open body model '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_body_model(ss.str());
}

void save_body_model(const BodyModel& model, const std::string& path) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << body_model_to_string(model) << '\n';
}

}  // namespace m3t::body
