// m3t: command-line front end for training, tokenizing, fitting and scoring.
//
// Exit codes: 0 success, 2 usage / validation / parse failure, 3 numeric
// failure, 1 anything else.

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "m3t/bodymodel.hpp"
#include "m3t/errors.hpp"
#include "m3t/fitting.hpp"
#include "m3t/fixtures.hpp"
#include "m3t/metrics.hpp"
#include "m3t/motion_io.hpp"
#include "m3t/motionvae.hpp"
#include "m3t/tokencodec.hpp"

namespace fs = std::filesystem;
using namespace m3t;

namespace {

const std::vector<std::string> kLanguages{"ASL", "DGS", "LSF"};

std::string data_dir() {
    const char* env = std::getenv("M3T_DATA_DIR");
    return env && *env ? env : "m3t-data";
}

std::string in_data_dir(const std::string& name) { return (fs::path(data_dir()) / name).string(); }

void require_file(const std::string& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw UsageError(what + " not found: '" + path + "'");
}

// Runs f(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so output order never depends on scheduling; the lowest-index
// exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < jobs; ++k)
        pool.emplace_back([&, k] {
            for (std::size_t i = k; i < n; i += jobs) {
                try {
                    f(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string modality_family(Modality m) {
    if (is_hand(m)) return "hand";
    return std::string(modality_name(m));
}

struct Preset {
    vae::QuantizerKind kind;
    std::string family;
};

Preset parse_preset(const std::string& text) {
    const auto dash = text.find('-');
    if (dash == std::string::npos) throw UsageError("preset must look like fsq-<family> or vq-<modality>, got '" + text + "'");
    const std::string kind = text.substr(0, dash), rest = text.substr(dash + 1);
    if (kind == "fsq") {
        if (rest != "body" && rest != "hand" && rest != "face")
            throw UsageError("unknown FSQ preset '" + text + "' (fsq-body, fsq-hand, fsq-face)");
        return {vae::QuantizerKind::fsq, rest};
    }
    if (kind == "vq") {
        if (rest == "hand") return {vae::QuantizerKind::vq, "hand"};
        try {
            return {vae::QuantizerKind::vq, modality_family(parse_modality(rest))};
        } catch (const Error&) {
            throw UsageError("unknown VQ preset '" + text + "'");
        }
    }
    throw UsageError("unknown preset '" + text + "'");
}

// Hand models are built in the right-hand frame.
Modality model_modality(Modality m) { return is_hand(m) ? Modality::right_hand : m; }

tokens::Vocabulary vocabulary_for(const vae::MotionVae& v) {
    std::array<std::size_t, 4> sizes{};
    for (auto m : kModalities) sizes[static_cast<std::size_t>(m)] = quant::LevelSpec::for_modality(m).codebook_size();
    const Modality vm = v.config().modality;
    for (auto m : kModalities)
        if (m == vm || (is_hand(m) && is_hand(vm))) sizes[static_cast<std::size_t>(m)] = v.config().codebook_entries();
    return tokens::build_vocabulary({}, kLanguages, sizes);
}

void write_text_or_stdout(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_file(path, text);
}

std::string fmt(Real v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

struct Options {
    // shared
    std::string modality;
    std::string preset;
    std::uint64_t seed = 0;
    std::size_t epochs = 50;
    std::string scale = "desk";
    std::size_t jobs = 1;
    std::string out;
    std::string trace;
    // train
    std::string data;
    std::size_t batch = 0;
    Real lr = 0;
    // tokenize / detokenize / stats
    std::string ckpt;
    std::vector<std::string> inputs;
    std::string out_dir;
    bool text = false;
    Real fps = 30.0;
    std::string histogram;
    // fit
    std::string model;
    std::string keypoints;
    std::string init;
    int steps = 200;
    Real fit_lr = 0.01;
    Real camera_scale = 1.0;
    // eval
    std::vector<std::string> pred;
    std::vector<std::string> gt;
    std::string hyp;
    std::string ref;
    // gen-fixtures
    std::size_t face_count = 400;
};

int cmd_train(const Options& o) {
    if (o.modality.empty()) throw UsageError("--modality is required");
    const Modality m = parse_modality(o.modality);
    const Preset preset = parse_preset(o.preset.empty() ? "fsq-" + modality_family(m) : o.preset);
    if (preset.family != modality_family(m))
        throw UsageError("preset '" + o.preset + "' does not fit modality " + std::string(modality_name(m)));
    if (o.scale != "desk" && o.scale != "full") throw UsageError("--scale must be desk or full");
    const bool full = o.scale == "full";

    const std::string data = o.data.empty() ? in_data_dir(modality_family(m) + ".m3td") : o.data;
    require_file(data, "dataset");
    auto items = read_dataset(data);
    if (items.empty()) throw UsageError("dataset '" + data + "' is empty");

    auto config = full ? vae::VaeConfig::full(model_modality(m), preset.kind)
                       : vae::VaeConfig::desk(model_modality(m), preset.kind);
    vae::TrainOptions t;
    t.epochs = o.epochs;
    t.seed = o.seed;
    if (full) {
        t.schedule = CosineSchedule{1e-4, 1e-6, 25, 100};
        t.batch_size = 8;
    }
    if (o.batch) t.batch_size = o.batch;
    if (o.lr > 0) t.schedule.base_lr = o.lr;
    if (t.schedule.min_lr > t.schedule.base_lr) t.schedule.min_lr = t.schedule.base_lr;

    vae::MotionVae model(config, o.seed);
    auto report = model.train(items, t);

    const std::string out = o.out.empty() ? std::string(modality_name(m)) + ".vae.json" : o.out;
    const std::string trace = o.trace.empty() ? out + ".trace" : o.trace;
    model.save(out);
    std::ostringstream tr;
    for (std::size_t e = 0; e < report.train_loss.size(); ++e) {
        tr << e + 1 << '\t' << fmt(report.train_loss[e]);
        if (e < report.val_loss.size()) tr << '\t' << fmt(report.val_loss[e]);
        tr << '\n';
    }
    write_file(trace, tr.str());
    std::cout << "trained " << modality_name(config.modality) << " " << vae::quantizer_name(config.quantizer)
              << " model on " << items.size() << " sequences for " << report.train_loss.size() << " epochs\n";
    if (!report.train_loss.empty())
        std::cout << "loss " << report.train_loss.front() << " -> " << report.train_loss.back() << ", best epoch "
                  << report.best_epoch + 1 << "\n";
    std::cout << "checkpoint " << out << "\ntrace " << trace << "\n";
    return 0;
}

int cmd_tokenize(const Options& o) {
    require_file(o.ckpt, "checkpoint");
    auto model = vae::MotionVae::load(o.ckpt);
    auto vocab = vocabulary_for(model);
    if (o.inputs.empty()) throw UsageError("--input is required");

    struct Job {
        MotionSequence motion;
        std::string name;
    };
    std::vector<Job> jobs;
    for (const auto& path : o.inputs) {
        require_file(path, "input");
        const auto bytes = read_file(path);
        const std::string stem = fs::path(path).stem().string();
        if (bytes.rfind("M3TD", 0) == 0) {
            auto items = dataset_from_bytes(bytes);
            for (std::size_t i = 0; i < items.size(); ++i) jobs.push_back({std::move(items[i]), stem + "_" + std::to_string(i)});
        } else {
            jobs.push_back({bytes.rfind("M3TK", 0) == 0 ? motion_from_bytes(bytes) : motion_from_text(bytes), stem});
        }
    }
    if (jobs.empty()) throw UsageError("no motions to tokenize");
    const bool single = jobs.size() == 1 && !o.out.empty();
    if (!single && o.out_dir.empty()) throw UsageError("several motions need --out-dir");
    if (!single) fs::create_directories(o.out_dir);

    std::vector<std::string> docs(jobs.size());
    parallel_for(jobs.size(), o.jobs, [&](std::size_t i) {
        auto stream = model.tokenize(jobs[i].motion);
        std::array<std::optional<quant::TokenStream>, 4> streams;
        streams[static_cast<std::size_t>(stream.modality)] = stream;
        docs[i] = tokens::serialize_streams(tokens::steps_from_streams(streams, vocab), vocab);
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const std::string path = single ? o.out : (fs::path(o.out_dir) / (jobs[i].name + ".tokens")).string();
        write_file(path, docs[i]);
    }
    std::cout << "tokenized " << jobs.size() << " motion(s)\n";
    return 0;
}

int cmd_detokenize(const Options& o) {
    require_file(o.ckpt, "checkpoint");
    auto model = vae::MotionVae::load(o.ckpt);
    auto vocab = vocabulary_for(model);
    if (o.inputs.size() != 1) throw UsageError("detokenize takes exactly one --input");
    if (o.out.empty()) throw UsageError("--out is required");
    require_file(o.inputs[0], "token document");
    auto doc = tokens::parse_streams(read_file(o.inputs[0]), vocab);

    const Modality vm = model.config().modality;
    auto compatible = [&](Modality m) { return m == vm || (is_hand(m) && is_hand(vm)); };
    std::optional<Modality> pick;
    if (!o.modality.empty()) {
        pick = parse_modality(o.modality);
        if (!compatible(*pick))
            throw UsageError("checkpoint models " + std::string(modality_name(vm)) + ", not " +
                             std::string(modality_name(*pick)));
    } else {
        for (auto m : kModalities) {
            if (!compatible(m)) continue;
            if (tokens::stream_from_steps(doc, m, vocab).indices.empty()) continue;
            if (pick) throw UsageError("document holds several streams this model can decode; pass --modality");
            pick = m;
        }
        if (!pick) throw UsageError("document holds no " + std::string(modality_name(vm)) + " tokens");
    }
    auto stream = tokens::stream_from_steps(doc, *pick, vocab);
    if (stream.indices.empty()) throw UsageError("the " + std::string(modality_name(*pick)) + " stream is empty");
    auto motion = model.detokenize(stream, o.fps);
    write_motion(motion, o.out, o.text);
    std::cout << "decoded " << stream.indices.size() << " tokens into " << motion.frames << " frames\n";
    return 0;
}

int cmd_stats(const Options& o) {
    if (o.inputs.empty()) throw UsageError("stats needs at least one --input token document");
    auto vocab = tokens::default_vocabulary(kLanguages);
    std::array<std::vector<quant::TokenStream>, 4> per;
    std::vector<tokens::TokenDocument> docs(o.inputs.size());
    for (const auto& p : o.inputs) require_file(p, "token document");
    parallel_for(o.inputs.size(), o.jobs, [&](std::size_t i) { docs[i] = tokens::parse_streams(read_file(o.inputs[i]), vocab); });
    for (const auto& doc : docs)
        for (auto m : kModalities) {
            auto s = tokens::stream_from_steps(doc, m, vocab);
            if (!s.indices.empty()) per[static_cast<std::size_t>(m)].push_back(std::move(s));
        }

    std::ostringstream summary, hist;
    summary << "modality\tcodebook_size\tused_fraction\tfrequency_sd\ttotal_tokens\n";
    hist << "modality\tindex\tcount\n";
    bool any = false;
    for (auto m : kModalities) {
        const auto& streams = per[static_cast<std::size_t>(m)];
        if (streams.empty()) continue;
        any = true;
        const std::size_t C = vocab.codebook_size(m);
        auto u = quant::utilization(streams, C);
        summary << modality_name(m) << '\t' << C << '\t' << fmt(u.used_fraction) << '\t' << fmt(u.frequency_sd) << '\t'
                << u.total_tokens << '\n';
        for (std::size_t i = 0; i < C; ++i) hist << modality_name(m) << '\t' << i << '\t' << u.frequency_histogram[i] << '\n';
    }
    if (!any) throw UsageError("the input documents hold no motion tokens");
    std::cout << summary.str();
    if (!o.out.empty()) write_file(o.out, summary.str());
    if (!o.histogram.empty()) write_file(o.histogram, hist.str());
    return 0;
}

int cmd_fit(const Options& o) {
    const std::string model_path = o.model.empty() ? in_data_dir("body_model.json") : o.model;
    const std::string kp_path = o.keypoints.empty() ? in_data_dir("fit_keypoints.txt") : o.keypoints;
    const std::string init_path = o.init.empty() ? in_data_dir("fit_init.json") : o.init;
    require_file(model_path, "body model");
    require_file(kp_path, "keypoint file");
    require_file(init_path, "initial parameters");
    if (o.steps < 0) throw UsageError("--steps must be non-negative");

    fit::FitProblem problem;
    problem.model = std::make_shared<body::BodyModel>(body::load_body_model(model_path));
    problem.keypoints = fit::load_keypoints(kp_path);
    problem.init_params = fit::load_params_sequence(init_path);
    problem.camera.scale = o.camera_scale;
    if (problem.keypoints.frames != problem.init_params.size())
        throw UsageError("keypoints hold " + std::to_string(problem.keypoints.frames) + " frames but the initialization " +
                         std::to_string(problem.init_params.size()));
    problem.validate();

    auto result = fit::refine_sequence(problem, o.steps, o.fit_lr);
    const std::string out = o.out.empty() ? "refined.json" : o.out;
    const std::string trace = o.trace.empty() ? out + ".trace" : o.trace;
    fit::save_params_sequence(result.params, out);
    std::ostringstream tr;
    for (std::size_t i = 0; i < result.trace.size(); ++i) tr << i << '\t' << fmt(result.trace[i]) << '\n';
    write_file(trace, tr.str());
    std::cout << "fit loss " << result.trace.front() << " -> " << result.trace.back() << " over " << o.steps
              << " steps\nparams " << out << "\ntrace " << trace << "\n";
    return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
    require_file(path, "text corpus");
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

int cmd_eval(const Options& o) {
    const bool geometric = !o.pred.empty() || !o.gt.empty();
    const bool text = !o.hyp.empty() || !o.ref.empty();
    if (!geometric && !text) throw UsageError("eval needs --pred/--gt parameter files or --hyp/--ref text files");
    metrics::MetricReport report;

    if (geometric) {
        if (o.pred.size() != o.gt.size())
            throw UsageError("got " + std::to_string(o.pred.size()) + " --pred files but " + std::to_string(o.gt.size()) +
                             " --gt files");
        const std::string model_path = o.model.empty() ? in_data_dir("body_model.json") : o.model;
        require_file(model_path, "body model");
        const auto model = body::load_body_model(model_path);
        auto to_sequences = [&](const std::string& path) {
            require_file(path, "parameter file");
            auto frames = fit::load_params_sequence(path);
            if (frames.empty()) throw UsageError("parameter file '" + path + "' holds no frames");
            metrics::JointSequence joints{frames.size(), model.n_joints, {}}, verts{frames.size(), model.n_vertices, {}};
            for (const auto& p : frames) {
                auto r = body::lbs_forward(model, p);
                joints.data.insert(joints.data.end(), r.joints.begin(), r.joints.end());
                verts.data.insert(verts.data.end(), r.vertices.begin(), r.vertices.end());
            }
            return std::make_pair(joints, verts);
        };
        report.sequences.resize(o.pred.size());
        parallel_for(o.pred.size(), o.jobs, [&](std::size_t i) {
            auto [pj, pv] = to_sequences(o.pred[i]);
            auto [gj, gv] = to_sequences(o.gt[i]);
            auto& row = report.sequences[i];
            row["dtw_jpe"] = metrics::dtw_jpe(pj, gj, metrics::Alignment::none);
            row["dtw_pa_jpe"] = metrics::dtw_jpe(pj, gj, metrics::Alignment::procrustes);
            row["dtw_vpe"] = metrics::dtw_vpe(pv, gv, metrics::Alignment::none);
        });
        for (const char* key : {"dtw_jpe", "dtw_pa_jpe", "dtw_vpe"}) {
            Real total = 0.0;
            for (const auto& row : report.sequences) total += row.at(key);
            report.corpus[key] = total / static_cast<Real>(report.sequences.size());
        }
    }
    if (text) {
        if (o.hyp.empty() || o.ref.empty()) throw UsageError("--hyp and --ref go together");
        auto hyp = read_lines(o.hyp), ref = read_lines(o.ref);
        if (hyp.size() != ref.size())
            throw UsageError("hypothesis corpus has " + std::to_string(hyp.size()) + " lines, reference corpus " +
                             std::to_string(ref.size()));
        std::vector<metrics::Sentence> hs, rs;
        for (const auto& l : hyp) hs.push_back(metrics::tokenize_words(l));
        for (const auto& l : ref) rs.push_back(metrics::tokenize_words(l));
        report.corpus["bleu4"] = metrics::bleu4(hs, rs);
        report.corpus["rouge_l"] = metrics::rouge_l(hs, rs);
    }
    write_text_or_stdout(o.out, metrics::metric_report_json(report) + "\n");
    return 0;
}

int cmd_gen_fixtures(const Options& o) {
    const std::string dir = o.out.empty() ? data_dir() : o.out;
    fs::create_directories(dir);
    auto at = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
    std::vector<std::string> written;
    auto note = [&](const std::string& name) { written.push_back(at(name)); };

    body::save_body_model(fixtures::toy_body_model(), at("body_model.json"));
    note("body_model.json");

    write_dataset(fixtures::sinusoid_motions(Modality::body, 64, 32, o.seed), at("body.m3td"));
    note("body.m3td");
    // Hands share one canonical distribution: every other right-hand
    // sequence is stored mirrored as a left hand.
    auto hands = fixtures::sinusoid_motions(Modality::right_hand, 64, 32, o.seed + 1);
    for (std::size_t i = 1; i < hands.size(); i += 2) {
        hands[i].data = body::mirror_hand_sequence(hands[i].data, hands[i].frames);
        hands[i].modality = Modality::left_hand;
    }
    write_dataset(hands, at("hand.m3td"));
    note("hand.m3td");
    write_dataset(fixtures::face_pca_motions(o.face_count, 16, o.seed + 2), at("face.m3td"));
    note("face.m3td");

    write_motion(fixtures::sinusoid_motions(Modality::body, 1, 32, o.seed + 100)[0], at("body_sample.m3tk"));
    note("body_sample.m3tk");
    write_motion(fixtures::face_pca_motions(1, 16, o.seed + 101)[0], at("face_sample.txt"), true);
    note("face_sample.txt");
    auto left = fixtures::sinusoid_motions(Modality::right_hand, 1, 16, o.seed + 102)[0];
    left.data = body::mirror_hand_sequence(left.data, left.frames);
    left.modality = Modality::left_hand;
    write_motion(left, at("left_hand_sample.m3tk"));
    note("left_hand_sample.m3tk");

    auto fx = fixtures::toy_fit_fixture(o.seed, 0.05);
    fit::save_keypoints(fx.problem.keypoints, at("fit_keypoints.txt"));
    note("fit_keypoints.txt");
    fit::save_params_sequence(fx.problem.init_params, at("fit_init.json"));
    note("fit_init.json");
    fit::save_params_sequence(fx.truth, at("fit_truth.json"));
    note("fit_truth.json");

    auto corpus = fixtures::text_corpus(50, o.seed);
    std::string refs, hyps;
    for (const auto& s : corpus.references) refs += s + "\n";
    for (const auto& s : corpus.hypotheses) hyps += s + "\n";
    write_file(at("refs.txt"), refs);
    note("refs.txt");
    write_file(at("hyps.txt"), hyps);
    note("hyps.txt");

    for (const auto& w : written) std::cout << w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"m3t: multi-modal motion tokenization toolkit"};
    app.require_subcommand(1);
    Options o;

    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };
    auto add_jobs = [&](CLI::App* c) { c->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber); };

    auto* train = app.add_subcommand("train", "Train a motion VAE");
    train->add_option("--modality", o.modality, "body, left_hand, right_hand or face")->required();
    train->add_option("--preset", o.preset, "fsq-body|fsq-hand|fsq-face|vq-<modality>");
    train->add_option("--epochs", o.epochs, "Training epochs");
    train->add_option("--scale", o.scale, "desk or full");
    train->add_option("--data", o.data, "M3TD dataset (default $M3T_DATA_DIR/<family>.m3td)");
    train->add_option("--batch", o.batch, "Batch size");
    train->add_option("--lr", o.lr, "Peak learning rate");
    train->add_option("--out", o.out, "Checkpoint path");
    train->add_option("--trace", o.trace, "Loss trace path");
    add_seed(train);

    auto* tok = app.add_subcommand("tokenize", "Motion files to token documents");
    tok->add_option("--ckpt", o.ckpt, "VAE checkpoint")->required();
    tok->add_option("--input", o.inputs, "Motion files or M3TD datasets")->required();
    tok->add_option("--out", o.out, "Output document (single motion)");
    tok->add_option("--out-dir", o.out_dir, "Output directory (several motions)");
    add_jobs(tok);

    auto* detok = app.add_subcommand("detokenize", "Token document to a motion file");
    detok->add_option("--ckpt", o.ckpt, "VAE checkpoint")->required();
    detok->add_option("--input", o.inputs, "Token document")->required();
    detok->add_option("--out", o.out, "Motion output path")->required();
    detok->add_option("--modality", o.modality, "Stream to decode");
    detok->add_option("--fps", o.fps, "Frame rate of the output");
    detok->add_flag("--text", o.text, "Write the text motion format");

    auto* stats = app.add_subcommand("stats", "Codebook utilization of token documents");
    stats->add_option("--input", o.inputs, "Token documents")->required();
    stats->add_option("--out", o.out, "Summary table path");
    stats->add_option("--histogram", o.histogram, "Per-index frequency table path");
    add_jobs(stats);

    auto* fitc = app.add_subcommand("fit", "Refine pose parameters against 2D keypoints");
    fitc->add_option("--model", o.model, "Body model JSON");
    fitc->add_option("--keypoints", o.keypoints, "Keypoint file");
    fitc->add_option("--init", o.init, "Initial parameter sequence");
    fitc->add_option("--steps", o.steps, "Adam steps");
    fitc->add_option("--lr", o.fit_lr, "Adam learning rate");
    fitc->add_option("--camera-scale", o.camera_scale, "Orthographic scale");
    fitc->add_option("--out", o.out, "Refined parameter sequence path");
    fitc->add_option("--trace", o.trace, "Loss trace path");

    auto* eval = app.add_subcommand("eval", "Geometric and text metrics");
    eval->add_option("--model", o.model, "Body model JSON");
    eval->add_option("--pred", o.pred, "Predicted parameter sequences");
    eval->add_option("--gt", o.gt, "Ground-truth parameter sequences");
    eval->add_option("--hyp", o.hyp, "Hypothesis sentences, one per line");
    eval->add_option("--ref", o.ref, "Reference sentences, one per line");
    eval->add_option("--out", o.out, "Report path (default stdout)");
    add_jobs(eval);

    auto* gen = app.add_subcommand("gen-fixtures", "Write the bundled synthetic data");
    gen->add_option("--out", o.out, "Directory (default $M3T_DATA_DIR or ./m3t-data)");
    gen->add_option("--face-count", o.face_count, "Face sequences to generate");
    add_seed(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*train) return cmd_train(o);
        if (*tok) return cmd_tokenize(o);
        if (*detok) return cmd_detokenize(o);
        if (*stats) return cmd_stats(o);
        if (*fitc) return cmd_fit(o);
        if (*eval) return cmd_eval(o);
        if (*gen) return cmd_gen_fixtures(o);
    } catch (const NumericError& e) {
        std::cerr << "m3t: numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "m3t: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "m3t: unexpected failure: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
