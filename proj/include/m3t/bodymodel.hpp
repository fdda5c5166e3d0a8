#pragma once

// Parametric upper-body model with a FLAME-style face: additive blendshapes
// on a template, 6D joint rotations, linear blend skinning, neck-ring weight
// blending between body and face skinning, eyelid offsets and rigid teeth.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "m3t/tensor.hpp"

namespace m3t::body {

using Mat3 = std::array<Real, 9>;  // row-major

inline constexpr std::size_t kBodyJoints = 10;
inline constexpr std::size_t kHandJoints = 15;
inline constexpr std::size_t kExpressionDims = 100;
inline constexpr std::size_t kEyelidDims = 2;
inline constexpr std::size_t kFaceDims = kExpressionDims + kEyelidDims + 6;  // + jaw 6D
inline constexpr std::size_t kFullPoseJoints = 1 + kBodyJoints + 2 * kHandJoints + 1;  // 42

// Which pose parameter drives a joint's local rotation.
struct JointSource {
    enum class Kind { root, body, left_hand, right_hand, jaw, fixed };
    Kind kind = Kind::fixed;
    std::size_t index = 0;  // row within the body / hand block

    std::string to_string() const;
    static JointSource parse(const std::string& text);
    bool operator==(const JointSource&) const = default;
};

struct BodyModel {
    std::size_t n_vertices = 0;
    std::size_t n_joints = 0;
    std::size_t n_shape = 0;       // beta dimension S
    std::size_t n_face_shape = 0;  // leading beta components that shape the face region
    std::size_t n_expression = 0;  // E <= 100

    std::vector<Real> template_vertices;   // N_v x 3
    std::vector<Real> shape_dirs;          // (N_v*3) x S
    std::vector<Real> pose_dirs;           // (N_v*3) x 9(N_j-1)
    std::vector<Real> expr_dirs;           // (N_v*3) x E
    std::vector<Real> eyelid_dirs;         // (N_v*3) x 2
    std::vector<Real> joint_regressor;     // N_j x N_v
    std::vector<Real> blend_weights;       // N_v x N_j, body skinning
    std::vector<Real> face_blend_weights;  // N_v x N_j, face skinning (neck-ring vertices); may be empty
    std::vector<int> parents;              // parents[0] == -1
    std::vector<JointSource> joint_sources;
    std::vector<std::pair<std::size_t, Real>> neck_ring;  // vertex -> body weighting ratio
    std::vector<std::pair<std::size_t, std::size_t>> teeth;  // vertex -> attachment joint
    std::vector<std::size_t> face_vertices;

    std::size_t n_pose_basis() const { return 9 * (n_joints - 1); }

    // Throws ModelError / LoadError naming the violated invariant.
    void validate() const;
    // Zeroes body-shape directions (components >= n_face_shape) on face
    // vertices, and face-shape directions elsewhere.
    void confine_face_shape();
    // Per-vertex skinning weights after neck-ring blending and teeth
    // attachment: N_v x N_j.
    std::vector<Real> effective_weights() const;
    std::size_t joint_for(JointSource::Kind kind, std::size_t index = 0) const;
};

struct PoseParams {
    std::vector<Real> beta;
    std::vector<Real> theta_body;   // 10 x 6
    std::vector<Real> theta_left;   // 15 x 6
    std::vector<Real> theta_right;  // 15 x 6
    std::vector<Real> psi_face;     // 100 expression + 2 eyelid + 6 jaw
    std::vector<Real> global_rotation;     // 6
    std::vector<Real> global_translation;  // 3

    // Zero shape/expression, identity rotations, zero translation.
    static PoseParams identity(std::size_t n_shape);
    void validate(const BodyModel& model) const;
};

// Differentiable counterpart of PoseParams; fields map one-to-one.
struct PoseTensors {
    Tensor beta, theta_body, theta_left, theta_right, psi_face, global_rotation, global_translation;

    static PoseTensors from(const PoseParams& p, bool requires_grad);
    PoseParams values() const;
};

// 6D -> rotation via Gram-Schmidt on the two column vectors.
// Throws NumericError if either column (after projection) is shorter than 1e-9.
Mat3 rot6d_to_matrix(std::span<const Real> r6);
// Rotation -> 6D (its first two columns).
std::array<Real, 6> matrix_to_rot6d(const Mat3& R);
// Batched differentiable form: [J x 6] -> [J x 3 x 3].
Tensor rot6d_to_matrix_tensor(const Tensor& r6);

// Reflection through the sagittal plane (M R M, M = diag(-1,1,1)) of every
// joint row of a 15 x 6 hand pose. Exact involution.
std::vector<Real> mirror_hand_pose(std::span<const Real> theta);
// Frame-wise mirroring of a flattened hand sequence (T x 90).
std::vector<Real> mirror_hand_sequence(std::span<const Real> frames, std::size_t n_frames);

// T_bar + B_S(beta) + B_P(theta) + B_E(psi), N_v x 3.
std::vector<Real> rest_pose_mesh(const BodyModel& model, const PoseParams& params);

struct LbsResult {
    std::vector<Real> vertices;  // N_v x 3
    std::vector<Real> joints;    // N_j x 3
};
LbsResult lbs_forward(const BodyModel& model, const PoseParams& params);

struct LbsTensors {
    Tensor rest;      // [N_v x 3] before skinning
    Tensor vertices;  // [N_v x 3]
    Tensor joints;    // [N_j x 3]
};
LbsTensors lbs_forward_tensor(const BodyModel& model, const PoseTensors& params);

BodyModel load_body_model(const std::string& path);
BodyModel parse_body_model(const std::string& text);
void save_body_model(const BodyModel& model, const std::string& path);
std::string body_model_to_string(const BodyModel& model);

}  // namespace m3t::body
