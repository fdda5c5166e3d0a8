#pragma once

// Sequence-level refinement of body and hand pose against 2D keypoints.
// Face parameters and shape stay at their initial values.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "m3t/bodymodel.hpp"

namespace m3t::fit {

struct Camera {
    Real scale = 1.0;
    Real u0 = 0.0;
    Real v0 = 0.0;
};

struct FitWeights {
    Real keypoint = 1.0;
    Real acceleration = 0.5;
    Real regularization = 0.01;
};

// F frames of K (x, y, confidence) triples.
struct Keypoints {
    std::size_t frames = 0;
    std::size_t points = 0;
    std::vector<Real> data;

    Real x(std::size_t f, std::size_t k) const { return data[(f * points + k) * 3]; }
    Real y(std::size_t f, std::size_t k) const { return data[(f * points + k) * 3 + 1]; }
    Real confidence(std::size_t f, std::size_t k) const { return data[(f * points + k) * 3 + 2]; }
    void validate() const;
};

struct FitProblem {
    std::shared_ptr<const body::BodyModel> model;
    std::vector<body::PoseParams> init_params;
    Keypoints keypoints;
    // Model joint observed by each keypoint; empty means joint k for keypoint k.
    std::vector<std::size_t> keypoint_joints;
    Camera camera;
    FitWeights weights;

    std::size_t frames() const { return init_params.size(); }
    std::size_t joint_of(std::size_t k) const { return keypoint_joints.empty() ? k : keypoint_joints[k]; }
    void validate() const;
};

// (x, y, z) -> s * (x, y) + (u0, v0). points: [K x 3] -> [K x 2].
Tensor project_orthographic(const Tensor& points, const Camera& camera);
std::vector<Real> project_orthographic(std::span<const Real> points, const Camera& camera);

struct FitLossTerms {
    Tensor total;
    Tensor keypoint;      // confidence-weighted mean over F*K of squared 2D error
    Tensor acceleration;  // mean over (F-2)*N_v of squared vertex second difference
    Tensor regularization;  // mean squared deviation of refined parameters from init
};

// Parameters refined during fitting, in a fixed order.
std::vector<Tensor*> refined_fields(body::PoseTensors& p);

FitLossTerms fit_loss_terms(const FitProblem& problem, const std::vector<body::PoseTensors>& params);
Tensor fit_loss(const FitProblem& problem, const std::vector<body::PoseTensors>& params);
Real fit_loss_value(const FitProblem& problem, const std::vector<body::PoseParams>& params);

struct FitResult {
    std::vector<body::PoseParams> params;
    std::vector<Real> trace;  // trace[0] is the initial loss, trace[i] the loss after step i
};

// Adam descent on fit_loss from the initialization. Throws NumericError
// naming the step at which the loss became non-finite.
FitResult refine_sequence(const FitProblem& problem, int steps, Real lr);

// Text format: header "m3t-keypoints v1 frames=F points=K", then one line per
// frame holding K "x y c" triples.
Keypoints parse_keypoints(const std::string& text);
std::string keypoints_to_string(const Keypoints& kp);
Keypoints load_keypoints(const std::string& path);
void save_keypoints(const Keypoints& kp, const std::string& path);

// Parameter sequences as JSON: {"format": "m3t-params", "version": 1,
// "frames": [{"beta": [...], "theta_body": [...], ...}, ...]}.
std::string params_sequence_to_json(const std::vector<body::PoseParams>& frames);
std::vector<body::PoseParams> parse_params_sequence(const std::string& text);
std::vector<body::PoseParams> load_params_sequence(const std::string& path);
void save_params_sequence(const std::vector<body::PoseParams>& frames, const std::string& path);

}  // namespace m3t::fit
