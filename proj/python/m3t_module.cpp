// Python bindings: numpy in, numpy out. Library errors surface as m3t.Error
// subclasses (also deriving from the matching builtin where one fits).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "m3t/bodymodel.hpp"
#include "m3t/errors.hpp"
#include "m3t/fitting.hpp"
#include "m3t/fixtures.hpp"
#include "m3t/metrics.hpp"
#include "m3t/motion_io.hpp"
#include "m3t/motionvae.hpp"
#include "m3t/quantizers.hpp"
#include "m3t/tokencodec.hpp"

namespace py = pybind11;
using namespace m3t;

namespace {

using Array = py::array_t<Real, py::array::c_style | py::array::forcecast>;

std::vector<Real> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array to_array(const std::vector<Real>& v, std::vector<py::ssize_t> shape) { return Array(shape, v.data()); }

MotionSequence motion_from_array(const Array& a, Modality m, Real fps) {
    if (a.ndim() != 2) throw DimensionError("motion arrays must be 2-D (frames x dim)");
    MotionSequence s{m, fps, static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), flat(a)};
    s.validate();
    return s;
}

Array motion_to_array(const MotionSequence& s) {
    return to_array(s.data, {static_cast<py::ssize_t>(s.frames), static_cast<py::ssize_t>(s.dim)});
}

py::list motions_to_list(const std::vector<MotionSequence>& items) {
    py::list out;
    for (const auto& s : items) out.append(motion_to_array(s));
    return out;
}

std::vector<MotionSequence> motions_from_list(const std::vector<Array>& arrays, Modality m) {
    std::vector<MotionSequence> out;
    for (const auto& a : arrays) out.push_back(motion_from_array(a, m, 30.0));
    return out;
}

body::PoseParams params_from_dict(const py::dict& d, std::size_t n_shape) {
    auto p = body::PoseParams::identity(n_shape);
    auto take = [&](const char* key, std::vector<Real>& field) {
        if (d.contains(key)) field = flat(d[key].cast<Array>());
    };
    take("beta", p.beta);
    take("theta_body", p.theta_body);
    take("theta_left", p.theta_left);
    take("theta_right", p.theta_right);
    take("psi_face", p.psi_face);
    take("global_rotation", p.global_rotation);
    take("global_translation", p.global_translation);
    return p;
}

quant::LevelSpec spec_of(const std::vector<int>& levels) {
    quant::LevelSpec s{levels};
    s.validate();
    return s;
}

}  // namespace

PYBIND11_MODULE(m3t, m) {
    m.doc() = "Discrete multi-modal motion tokenization toolkit";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<ModelError>(m, "ModelError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<LoadError>(m, "LoadError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());

    py::enum_<Modality>(m, "Modality")
        .value("body", Modality::body)
        .value("left_hand", Modality::left_hand)
        .value("right_hand", Modality::right_hand)
        .value("face", Modality::face);
    m.def("modality_dim", &modality_dim);

    // FSQ and token packing.
    m.def("preset_levels", [](Modality mod) { return quant::LevelSpec::for_modality(mod).levels; });
    m.def("codebook_size", [](const std::vector<int>& levels) { return spec_of(levels).codebook_size(); });
    m.def(
        "fsq_quantize",
        [](const Array& z, const std::vector<int>& levels) {
            auto f = quant::fsq_quantize(flat(z), spec_of(levels));
            return py::make_tuple(f.quantized, f.digits);
        },
        py::arg("z"), py::arg("levels"), "One latent frame -> (level values, digits).");
    m.def("digits_to_index", [](const std::vector<int>& digits, const std::vector<int>& levels) {
        return quant::digits_to_index(digits, spec_of(levels));
    });
    m.def("index_to_digits",
          [](std::size_t index, const std::vector<int>& levels) { return quant::index_to_digits(index, spec_of(levels)); });
    m.def(
        "utilization",
        [](const std::vector<std::vector<std::size_t>>& streams, std::size_t C) {
            std::vector<quant::TokenStream> ts;
            for (const auto& s : streams) ts.push_back({Modality::body, "", s, false});
            auto u = quant::utilization(ts, C);
            py::dict d;
            d["used_fraction"] = u.used_fraction;
            d["frequency_sd"] = u.frequency_sd;
            d["total_tokens"] = u.total_tokens;
            d["histogram"] = u.frequency_histogram;
            return d;
        },
        py::arg("streams"), py::arg("codebook_size"));

    // Body model.
    py::class_<body::BodyModel, std::shared_ptr<body::BodyModel>>(m, "BodyModel")
        .def_static("load", [](const std::string& path) { return std::make_shared<body::BodyModel>(body::load_body_model(path)); })
        .def_static("toy", [] { return std::make_shared<body::BodyModel>(fixtures::toy_body_model()); })
        .def("save", [](const body::BodyModel& b, const std::string& path) { body::save_body_model(b, path); })
        .def_readonly("n_vertices", &body::BodyModel::n_vertices)
        .def_readonly("n_joints", &body::BodyModel::n_joints)
        .def_readonly("n_shape", &body::BodyModel::n_shape)
        .def(
            "forward",
            [](const body::BodyModel& b, const py::dict& params) {
                auto r = body::lbs_forward(b, params_from_dict(params, b.n_shape));
                return py::make_tuple(to_array(r.vertices, {static_cast<py::ssize_t>(b.n_vertices), 3}),
                                      to_array(r.joints, {static_cast<py::ssize_t>(b.n_joints), 3}));
            },
            py::arg("params") = py::dict(),
            "Skinned (vertices, joints). Missing parameter fields take identity values.");
    m.def("rot6d_to_matrix", [](const Array& r6) {
        auto R = body::rot6d_to_matrix(flat(r6));
        return to_array(std::vector<Real>(R.begin(), R.end()), {3, 3});
    });
    m.def("mirror_hand_pose", [](const Array& theta) {
        auto v = flat(theta);
        return to_array(body::mirror_hand_pose(v), {static_cast<py::ssize_t>(v.size())});
    });

    // Fitting on the toy fixture.
    m.def(
        "fit_toy",
        [](std::uint64_t seed, Real perturbation, int steps, Real lr) {
            auto fx = fixtures::toy_fit_fixture(seed, perturbation);
            py::gil_scoped_release release;
            return fit::refine_sequence(fx.problem, steps, lr).trace;
        },
        py::arg("seed") = 0, py::arg("perturbation") = 0.05, py::arg("steps") = 200, py::arg("lr") = 0.01,
        "Refines the perturbed toy fixture; returns the loss trace.");

    // Synthetic data.
    m.def(
        "sinusoid_motions",
        [](Modality mod, std::size_t count, std::size_t frames, std::uint64_t seed) {
            return motions_to_list(fixtures::sinusoid_motions(mod, count, frames, seed));
        },
        py::arg("modality"), py::arg("count"), py::arg("frames"), py::arg("seed") = 0);
    m.def(
        "face_pca_motions",
        [](std::size_t count, std::size_t frames, std::uint64_t seed) {
            return motions_to_list(fixtures::face_pca_motions(count, frames, seed));
        },
        py::arg("count"), py::arg("frames"), py::arg("seed") = 0);

    // Motion VAE.
    py::class_<vae::MotionVae>(m, "MotionVae")
        .def(py::init([](Modality mod, const std::string& quantizer, std::uint64_t seed, std::size_t width,
                         std::size_t n_res_blocks) {
                 if (quantizer != "fsq" && quantizer != "vq") throw UsageError("quantizer must be 'fsq' or 'vq'");
                 auto cfg = vae::VaeConfig::desk(is_hand(mod) ? Modality::right_hand : mod,
                                                 quantizer == "fsq" ? vae::QuantizerKind::fsq : vae::QuantizerKind::vq);
                 cfg.width = width;
                 cfg.n_res_blocks = n_res_blocks;
                 return vae::MotionVae(cfg, seed);
             }),
             py::arg("modality"), py::arg("quantizer") = "fsq", py::arg("seed") = 0, py::arg("width") = 64,
             py::arg("n_res_blocks") = 2)
        .def_property_readonly("window", [](const vae::MotionVae& v) { return v.config().window(); })
        .def_property_readonly("codebook_size", [](const vae::MotionVae& v) { return v.config().codebook_entries(); })
        .def_property_readonly("modality", [](const vae::MotionVae& v) { return v.config().modality; })
        .def(
            "train",
            [](vae::MotionVae& v, const std::vector<Array>& data, Modality mod, std::size_t epochs, std::uint64_t seed,
               Real lr, std::size_t batch_size) {
                auto seqs = motions_from_list(data, mod);
                vae::TrainOptions o;
                o.epochs = epochs;
                o.seed = seed;
                o.schedule.base_lr = lr;
                o.schedule.min_lr = std::min(o.schedule.min_lr, lr);
                o.batch_size = batch_size;
                py::gil_scoped_release release;
                return v.train(seqs, o).train_loss;
            },
            py::arg("data"), py::arg("modality"), py::arg("epochs") = 50, py::arg("seed") = 0, py::arg("lr") = 1e-3,
            py::arg("batch_size") = 16, "Returns the per-epoch mean reconstruction loss.")
        .def(
            "encode",
            [](const vae::MotionVae& v, const Array& x, Modality mod) {
                auto z = v.encode(motion_from_array(x, mod, 30.0));
                const auto d = static_cast<py::ssize_t>(v.config().latent_dim);
                return to_array(z, {static_cast<py::ssize_t>(z.size()) / d, d});
            },
            py::arg("x"), py::arg("modality"))
        .def(
            "tokenize",
            [](const vae::MotionVae& v, const Array& x, Modality mod) {
                return v.tokenize(motion_from_array(x, mod, 30.0)).indices;
            },
            py::arg("x"), py::arg("modality"))
        .def(
            "detokenize",
            [](const vae::MotionVae& v, const std::vector<std::size_t>& indices, Modality mod) {
                return motion_to_array(v.detokenize(quant::TokenStream{mod, "", indices, false}));
            },
            py::arg("indices"), py::arg("modality"))
        .def("reconstruct",
             [](const vae::MotionVae& v, const Array& x, Modality mod) {
                 return motion_to_array(v.reconstruct(motion_from_array(x, mod, 30.0)));
             })
        .def("save", &vae::MotionVae::save)
        .def_static("load", &vae::MotionVae::load);

    // Token documents.
    m.def(
        "serialize_tokens",
        [](const std::map<std::string, std::vector<std::size_t>>& streams) {
            auto vocab = tokens::default_vocabulary();
            std::array<std::optional<quant::TokenStream>, 4> s;
            for (const auto& [name, idx] : streams) {
                const Modality mod = parse_modality(name);
                s[static_cast<std::size_t>(mod)] = quant::TokenStream{mod, "", idx, false};
            }
            return tokens::serialize_streams(tokens::steps_from_streams(s, vocab), vocab);
        },
        "Streams keyed by modality name -> token document text.");
    m.def("parse_tokens", [](const std::string& text) {
        auto vocab = tokens::default_vocabulary();
        auto doc = tokens::parse_streams(text, vocab);
        py::dict out;
        for (auto mod : kModalities) {
            auto s = tokens::stream_from_steps(doc, mod, vocab);
            if (!s.indices.empty()) out[py::str(std::string(modality_name(mod)))] = s.indices;
        }
        return out;
    });
    m.def("fuse_embeddings", [](const std::vector<std::vector<Real>>& e) { return tokens::fuse_embeddings(e); });

    // Metrics.
    m.def("dtw", [](const Array& a, const Array& b) {
        auto r = metrics::dtw(flat(a), flat(b));
        return py::make_tuple(r.cost, r.path);
    });
    m.def("procrustes_align", [](const Array& x, const Array& y) {
        auto r = metrics::procrustes_align(flat(x), flat(y));
        return py::make_tuple(to_array(std::vector<Real>(r.rotation.begin(), r.rotation.end()), {3, 3}),
                              to_array(std::vector<Real>(r.translation.begin(), r.translation.end()), {3}), r.residual);
    });
    auto split = [](const std::vector<std::string>& lines) {
        std::vector<metrics::Sentence> out;
        for (const auto& l : lines) out.push_back(metrics::tokenize_words(l));
        return out;
    };
    m.def("bleu4", [split](const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
        return metrics::bleu4(split(hyp), split(ref));
    });
    m.def("rouge_l", [split](const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
        return metrics::rouge_l(split(hyp), split(ref));
    });

    // Motion files.
    m.def(
        "read_motion",
        [](const std::string& path) {
            auto s = read_motion(path);
            return py::make_tuple(motion_to_array(s), s.modality, s.fps);
        },
        "-> (frames array, modality, fps)");
    m.def(
        "write_motion",
        [](const Array& x, Modality mod, const std::string& path, Real fps, bool text) {
            write_motion(motion_from_array(x, mod, fps), path, text);
        },
        py::arg("x"), py::arg("modality"), py::arg("path"), py::arg("fps") = 30.0, py::arg("text") = false);
}
