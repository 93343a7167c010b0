#include "modsr/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <ostream>

#include "modsr/error.hpp"
#include "modsr/io.hpp"
#include "modsr/synth.hpp"

namespace modsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void guard_overwrite(const std::vector<fs::path>& outputs, bool force) {
    if (force) return;
    for (const auto& p : outputs)
        if (fs::exists(p)) throw ConfigError("output " + p.string() + " already exists; pass --force to overwrite");
}

fs::path frame_path(const fs::path& dir, int index) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.pgm", index);
    return dir / name;
}

ImageGrid read_with_mask(const fs::path& image, const fs::path& mask) {
    ImageGrid img = io::read_pgm(image);
    if (fs::exists(mask)) {
        const ImageGrid m = io::read_pgm(mask);
        if (m.width() != img.width() || m.height() != img.height())
            throw DataError("mask " + mask.string() + " does not match " + image.string());
        std::vector<std::uint8_t> valid(m.size());
        for (std::size_t k = 0; k < m.size(); ++k) valid[k] = m[k] > 0.5 ? 1 : 0;
        img.set_mask(std::move(valid));
    }
    return img;
}

void write_with_mask(const fs::path& image, const fs::path& mask, const ImageGrid& img) {
    io::write_pgm(image, img);
    io::write_mask_pgm(mask, img.mask(), img.width(), img.height());
}

template <class F>
auto run_stage(const char* name, std::ostream& log, F&& f) {
    log << "[" << name << "]\n";
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("stage ") + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string("stage ") + name + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("stage ") + name + ": " + e.what());
    }
}

fs::path out_file(const PipelineConfig& pc, const char* name) { return pc.out_dir / name; }

Baseline run_baseline(const PipelineConfig& pc, const FrameSet& fs_, const RegistrationResult& reg, std::ostream& log) {
    std::optional<ImageGrid> truth;
    if (fs::exists(pc.truth)) truth = io::read_pgm(pc.truth);
    const int crop = 4 * pc.magnification;
    Baseline b = best_single_frame(fs_.frames, fs_.indices, reg, pc.grid, truth ? &*truth : nullptr, crop);
    write_with_mask(out_file(pc, files::kBicubic), out_file(pc, files::kBicubicMask), b.image);
    json j{{"frame_index", b.frame_index}};
    if (truth) j["psnr"] = b.psnr;
    io::write_text(out_file(pc, files::kBaselineReport), j.dump(2) + "\n");
    log << "baseline: frame " << b.frame_index << "\n";
    return b;
}

}  // namespace

FrameSet load_frames(const std::string& pattern) {
    const auto paths = io::glob_files(pattern);
    if (paths.empty()) throw DataError("no frames match " + pattern);
    std::vector<std::pair<int, fs::path>> entries;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const int idx = io::index_from_filename(paths[k]);
        entries.emplace_back(idx >= 0 ? idx : static_cast<int>(k), paths[k]);
    }
    std::sort(entries.begin(), entries.end());
    FrameSet out;
    for (const auto& [idx, path] : entries) {
        if (!out.indices.empty() && out.indices.back() == idx)
            throw DataError("duplicate frame index " + std::to_string(idx) + " (" + path.string() + ")");
        out.indices.push_back(idx);
        out.frames.push_back(io::read_pgm(path));
    }
    for (const auto& f : out.frames)
        if (f.width() != out.frames.front().width() || f.height() != out.frames.front().height())
            throw DataError("frames differ in size");
    return out;
}

std::vector<CorrespondenceSet> match_correspondences(const std::vector<CorrespondenceSet>& sets,
                                                     const std::vector<int>& indices) {
    std::map<int, const CorrespondenceSet*> by_index;
    for (const auto& s : sets) by_index[s.frame_index] = &s;
    std::vector<CorrespondenceSet> out;
    for (int idx : indices) {
        auto it = by_index.find(idx);
        if (it == by_index.end()) throw DataError("no correspondences for frame " + std::to_string(idx));
        out.push_back(*it->second);
    }
    return out;
}

std::vector<SystemMatrix> build_system_matrices(const RegistrationResult& reg, const std::vector<int>& indices,
                                                const std::vector<ImageGrid>& frames, const HrGridSpec& grid,
                                                double psf_sigma) {
    std::vector<SystemMatrix> out;
    out.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int pos = reg.position_of(indices[i]);
        if (pos < 0) throw DataError("registration has no entry for frame " + std::to_string(indices[i]));
        const MotionField field = build_motion_field(indices[i], reg.homographies[pos], reg.camera, grid,
                                                     frames[i].width(), frames[i].height());
        out.push_back(build_system_matrix(field, psf_sigma, grid));
    }
    return out;
}

ReconstructionReport reconstruct(const std::vector<ImageGrid>& frames, const std::vector<int>& indices,
                                 const RegistrationResult& reg, const HrGridSpec& grid, double psf_sigma,
                                 const BtvParams& btv, const SolverOptions& solver) {
    const auto matrices = build_system_matrices(reg, indices, frames, grid, psf_sigma);
    // Observations mapped outside the module carry no information about f.
    std::vector<ImageGrid> masked = frames;
    for (std::size_t i = 0; i < masked.size(); ++i) {
        std::vector<std::uint8_t> valid(masked[i].size());
        for (std::size_t r = 0; r < valid.size(); ++r) valid[r] = matrices[i].row_valid(r) && masked[i].valid(r);
        masked[i].set_mask(std::move(valid));
    }
    RegistrationResult ordered;
    ordered.camera = reg.camera;
    for (int idx : indices) {
        ordered.frame_indices.push_back(idx);
        ordered.homographies.push_back(reg.homographies[reg.position_of(idx)]);
    }
    ImageGrid init = build_template(frames, ordered, grid);
    double mean = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < init.size(); ++k)
        if (init.valid(k)) {
            mean += init[k];
            ++n;
        }
    mean = n ? mean / n : 0.5;
    for (std::size_t k = 0; k < init.size(); ++k)
        if (!init.valid(k)) init[k] = mean;
    init.clear_mask();
    return solve_map(masked, matrices, btv, solver, init);
}

Baseline best_single_frame(const std::vector<ImageGrid>& frames, const std::vector<int>& indices,
                           const RegistrationResult& reg, const HrGridSpec& grid, const ImageGrid* truth, int crop) {
    Baseline best;
    double best_score = -1e300;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const int pos = reg.position_of(indices[i]);
        if (pos < 0) throw DataError("registration has no entry for frame " + std::to_string(indices[i]));
        ImageGrid img = bicubic_rectify(frames[i], reg.homographies[pos], reg.camera, grid);
        double score = 0.0;
        double p = 0.0;
        if (truth) {
            try {
                p = psnr(*truth, img, crop);
            } catch (const DataError&) {
                continue;
            }
            score = p;
        } else {
            score = static_cast<double>(img.valid_count());
        }
        if (score > best_score) {
            best_score = score;
            best.image = std::move(img);
            best.frame_index = indices[i];
            best.psnr = p;
        }
    }
    if (best.frame_index < 0) throw DataError("no frame overlaps the reconstruction grid");
    return best;
}

MetricsReport evaluate_images(const ImageGrid& truth, const std::vector<std::pair<std::string, ImageGrid>>& methods,
                              int crop) {
    ImageGrid common = truth;
    std::vector<std::uint8_t> valid(truth.size(), 1);
    for (const auto& [name, img] : methods) {
        if (img.width() != truth.width() || img.height() != truth.height())
            throw DataError("evaluate: " + name + " is " + std::to_string(img.width()) + "x" +
                            std::to_string(img.height()) + ", ground truth is " + std::to_string(truth.width()) +
                            "x" + std::to_string(truth.height()));
        for (std::size_t k = 0; k < valid.size(); ++k) valid[k] = valid[k] && img.valid(k) && truth.valid(k);
    }
    common.set_mask(std::move(valid));
    MetricsReport report;
    report.border_crop = crop;
    for (const auto& [name, img] : methods) report.rows.push_back({name, psnr(common, img, crop), ssim(common, img, crop)});
    return report;
}

void cmd_synth(const PipelineConfig& pc, bool force, std::ostream& log) {
    const fs::path frame_dir = pc.frames_glob.parent_path();
    guard_overwrite({pc.truth, pc.correspondences, out_file(pc, files::kTruthRegistration), frame_path(frame_dir, 0)},
                    force);
    ensure_dir(pc.out_dir);
    ensure_dir(frame_dir);
    if (!pc.truth.parent_path().empty()) ensure_dir(pc.truth.parent_path());

    const Scene scene = generate_scene(pc.scene);
    const Sequence seq = generate_sequence(scene.image, pc.scene, pc.acquisition);
    // Stale frames from an earlier, longer run would be picked up by the glob.
    if (force)
        for (const auto& p : io::glob_files(pc.frames_glob.string())) fs::remove(p);
    io::write_pgm(pc.truth, scene.image);
    io::write_mask_pgm(out_file(pc, files::kCrackMask), scene.crack_mask, scene.image.width(), scene.image.height());
    for (std::size_t i = 0; i < seq.frames.size(); ++i)
        io::write_pgm(frame_path(frame_dir, seq.truth.frame_indices[i]), seq.frames[i]);
    io::write_correspondences(pc.correspondences,
                              perturb_correspondences(seq.correspondences, pc.correspondence_noise, pc.correspondence_seed));
    io::write_registration(out_file(pc, files::kTruthRegistration), seq.truth);
    io::write_text(out_file(pc, files::kConfig), pc.effective.serialize());
    log << "synth: " << seq.frames.size() << " frames of " << pc.acquisition.lr_width << "x" << pc.acquisition.lr_height
        << ", ground truth " << scene.image.width() << "x" << scene.image.height() << "\n";
}

RegistrationResult cmd_register(const PipelineConfig& pc, bool force, std::ostream& log) {
    guard_overwrite({pc.registration}, force);
    if (!fs::exists(pc.correspondences)) throw DataError("correspondence file not found: " + pc.correspondences.string());
    const FrameSet frames = load_frames(pc.frames_glob.string());
    const auto sets = match_correspondences(io::read_correspondences(pc.correspondences), frames.indices);
    RegistrationResult reg = multiscale_register(frames.frames, sets, pc.grid, pc.registration_options);

    ensure_dir(pc.registration.parent_path().empty() ? fs::path(".") : pc.registration.parent_path());
    io::write_registration(pc.registration, reg);
    json j;
    j["camera"] = {{"fx", reg.camera.fx()}, {"fy", reg.camera.fy()},     {"cx", reg.camera.cx()},
                   {"cy", reg.camera.cy()}, {"skew", reg.camera.skew()}, {"kappa", reg.camera.kappa()}};
    j["frames"] = json::array();
    char line[160];
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const double rep = reg.reprojection_rms[i];
        const double res = i < reg.residuals.size() ? reg.residuals[i] : 0.0;
        const char* status = i < reg.status.size() ? to_string(reg.status[i]) : "not_run";
        j["frames"].push_back({{"index", reg.frame_indices[i]},
                               {"reprojection_rms", rep},
                               {"photometric_rms", res},
                               {"status", status}});
        std::snprintf(line, sizeof line, "frame %3d  reprojection rms %.4f px  photometric rms %.5f  %s\n",
                      reg.frame_indices[i], rep, res, status);
        log << line;
    }
    io::write_text(out_file(pc, files::kRegistrationReport), j.dump(2) + "\n");
    return reg;
}

ReconstructionReport cmd_reconstruct(const PipelineConfig& pc, bool force, std::ostream& log) {
    const fs::path out = out_file(pc, files::kReconstruction);
    guard_overwrite({out}, force);
    if (!fs::exists(pc.registration)) throw DataError("registration file not found: " + pc.registration.string());
    const RegistrationResult reg = io::read_registration(pc.registration);
    const FrameSet frames = load_frames(pc.frames_glob.string());
    ReconstructionReport report =
        reconstruct(frames.frames, frames.indices, reg, pc.grid, pc.psf_sigma, pc.btv, pc.solver);

    ensure_dir(pc.out_dir);
    write_with_mask(out, out_file(pc, files::kReconstructionMask), report.f_hat);
    json j{{"iterations", report.iterations},
           {"outer_passes", report.outer_passes},
           {"wall_time_s", report.wall_time},
           {"uncovered_pixels", report.uncovered_pixels},
           {"final_relative_gradient", report.final_relative_gradient},
           {"objective_trace", report.objective_trace},
           {"pass_starts", report.pass_starts},
           {"width", report.f_hat.width()},
           {"height", report.f_hat.height()},
           {"lambda", pc.btv.lambda},
           {"psf_sigma", pc.psf_sigma}};
    io::write_text(out_file(pc, files::kReconstructionReport), j.dump(2) + "\n");
    char line[160];
    std::snprintf(line, sizeof line, "reconstruct: %dx%d, %d iterations, %.1f s, objective %.6g\n",
                  report.f_hat.width(), report.f_hat.height(), report.iterations, report.wall_time,
                  report.objective_trace.empty() ? 0.0 : report.objective_trace.back());
    log << line;
    return report;
}

MetricsReport cmd_evaluate(const PipelineConfig& pc, bool force, std::ostream& log) {
    guard_overwrite({out_file(pc, files::kMetricsJson)}, force);
    if (!fs::exists(pc.truth)) throw DataError("ground truth not found: " + pc.truth.string());
    const ImageGrid truth = io::read_pgm(pc.truth);
    const fs::path recon = out_file(pc, files::kReconstruction);
    if (!fs::exists(recon)) throw DataError("reconstruction not found: " + recon.string());
    if (!fs::exists(out_file(pc, files::kBicubic))) {
        if (!fs::exists(pc.registration)) throw DataError("registration file not found: " + pc.registration.string());
        run_baseline(pc, load_frames(pc.frames_glob.string()), io::read_registration(pc.registration), log);
    }
    const ImageGrid f_hat = read_with_mask(recon, out_file(pc, files::kReconstructionMask));
    const ImageGrid bicubic = read_with_mask(out_file(pc, files::kBicubic), out_file(pc, files::kBicubicMask));
    const MetricsReport report = evaluate_images(truth, {{"map_btv", f_hat}, {"bicubic", bicubic}}, 4 * pc.magnification);
    io::write_text(out_file(pc, files::kMetricsText), report.to_table());
    io::write_text(out_file(pc, files::kMetricsJson), report.to_json() + "\n");
    log << report.to_table();
    return report;
}

MetricsReport cmd_pipeline(const PipelineConfig& pc, bool force, std::ostream& log) {
    std::vector<fs::path> outputs = {pc.registration, out_file(pc, files::kReconstruction),
                                     out_file(pc, files::kBicubic), out_file(pc, files::kMetricsJson)};
    if (pc.run_synth) outputs.push_back(pc.truth);
    guard_overwrite(outputs, force);
    ensure_dir(pc.out_dir);
    io::write_text(out_file(pc, files::kConfig), pc.effective.serialize());

    if (pc.run_synth) run_stage("synth", log, [&] { cmd_synth(pc, true, log); return 0; });
    const RegistrationResult reg = run_stage("register", log, [&] { return cmd_register(pc, true, log); });
    run_stage("reconstruct", log, [&] { return cmd_reconstruct(pc, true, log); });
    run_stage("baseline", log, [&] { return run_baseline(pc, load_frames(pc.frames_glob.string()), reg, log); });
    return run_stage("evaluate", log, [&] { return cmd_evaluate(pc, true, log); });
}

}  // namespace modsr
