#include "modsr/io.hpp"

#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "modsr/error.hpp"

namespace modsr::io {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    if (!fs::exists(path)) throw DataError("file not found: " + path.string());
    std::ifstream in(path, mode);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

// Next header token of a PNM file, skipping comments.
std::string pnm_token(std::istream& in) {
    std::string tok;
    char c;
    while (in.get(c)) {
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

std::string parse_error(const fs::path& path, int line, const std::string& what) {
    return path.string() + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

void write_pgm(const fs::path& path, const ImageGrid& img) {
    auto out = open_out(path, std::ios::binary);
    out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::vector<unsigned char> buf(img.size() * 2);
    for (std::size_t k = 0; k < img.size(); ++k) {
        const double v = std::clamp(img[k], 0.0, 1.0);
        const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
        buf[2 * k] = static_cast<unsigned char>(q >> 8);
        buf[2 * k + 1] = static_cast<unsigned char>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

ImageGrid read_pgm(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    if (pnm_token(in) != "P5") throw DataError(path.string() + ": not a binary PGM (P5) file");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(pnm_token(in));
        h = std::stoi(pnm_token(in));
        maxval = std::stoi(pnm_token(in));
    } catch (const std::exception&) {
        throw DataError(path.string() + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw DataError(path.string() + ": unsupported PGM header");
    ImageGrid img(w, h);
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(img.size() * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) throw DataError(path.string() + ": truncated PGM data");
    for (std::size_t k = 0; k < img.size(); ++k) {
        const unsigned v = bytes == 2 ? (static_cast<unsigned>(buf[2 * k]) << 8) | buf[2 * k + 1] : buf[k];
        img[k] = static_cast<double>(v) / maxval;
    }
    return img;
}

void write_mask_pgm(const fs::path& path, const std::vector<std::uint8_t>& mask, int width, int height) {
    ImageGrid img(width, height);
    for (std::size_t k = 0; k < img.size(); ++k) img[k] = (mask.empty() || mask[k]) ? 1.0 : 0.0;
    write_pgm(path, img);
}

std::vector<CorrespondenceSet> read_correspondences(const fs::path& path) {
    auto in = open_in(path);
    std::map<int, CorrespondenceSet> sets;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string first;
        if (!(ss >> first)) continue;
        int index = 0;
        Correspondence c;
        try {
            std::size_t used = 0;
            index = std::stoi(first, &used);
            if (used != first.size()) throw std::invalid_argument("index");
        } catch (const std::exception&) {
            throw DataError(parse_error(path, lineno, "expected integer frame index"));
        }
        if (!(ss >> c.module.y1 >> c.module.y2 >> c.pixel.u >> c.pixel.v))
            throw DataError(parse_error(path, lineno, "expected `frame_index y1 y2 u v`"));
        std::string extra;
        if (ss >> extra) throw DataError(parse_error(path, lineno, "trailing data"));
        auto& set = sets[index];
        set.frame_index = index;
        set.pairs.push_back(c);
    }
    std::vector<CorrespondenceSet> out;
    for (auto& [k, v] : sets) out.push_back(std::move(v));
    return out;
}

void write_correspondences(const fs::path& path, const std::vector<CorrespondenceSet>& sets) {
    auto out = open_out(path);
    out << "# frame_index y1 y2 u v\n";
    char buf[256];
    for (const auto& set : sets)
        for (const auto& c : set.pairs) {
            std::snprintf(buf, sizeof buf, "%d %.17g %.17g %.17g %.17g\n", set.frame_index, c.module.y1, c.module.y2,
                          c.pixel.u, c.pixel.v);
            out << buf;
        }
    if (!out) throw DataError("failed writing " + path.string());
}

void write_registration(const fs::path& path, const RegistrationResult& reg) {
    auto out = open_out(path);
    char buf[512];
    out << "# modsr registration\n";
    const CameraModel& c = reg.camera;
    std::snprintf(buf, sizeof buf, "camera %.17g %.17g %.17g %.17g %.17g %.17g\n", c.fx(), c.fy(), c.cx(), c.cy(),
                  c.skew(), c.kappa());
    out << buf;
    for (std::size_t i = 0; i < reg.size(); ++i) {
        const Eigen::Matrix3d& h = reg.homographies[i].matrix();
        out << "frame " << reg.frame_indices[i];
        for (int r = 0; r < 3; ++r)
            for (int k = 0; k < 3; ++k) {
                std::snprintf(buf, sizeof buf, " %.17g", h(r, k));
                out << buf;
            }
        const double res = i < reg.residuals.size() ? reg.residuals[i] : 0.0;
        const double rep = i < reg.reprojection_rms.size() ? reg.reprojection_rms[i] : 0.0;
        std::snprintf(buf, sizeof buf, " %.17g %.17g\n", res, rep);
        out << buf;
    }
    if (!out) throw DataError("failed writing " + path.string());
}

RegistrationResult read_registration(const fs::path& path) {
    auto in = open_in(path);
    RegistrationResult reg;
    bool have_camera = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;
        if (key == "camera") {
            double v[6];
            for (double& x : v)
                if (!(ss >> x)) throw DataError(parse_error(path, lineno, "expected `camera fx fy cx cy skew kappa`"));
            try {
                reg.camera = CameraModel(v[0], v[1], v[2], v[3], v[4], v[5]);
            } catch (const Error& e) {
                throw DataError(parse_error(path, lineno, e.what()));
            }
            have_camera = true;
        } else if (key == "frame") {
            int index = 0;
            Eigen::Matrix3d h;
            double res = 0.0, rep = 0.0;
            if (!(ss >> index)) throw DataError(parse_error(path, lineno, "expected frame index"));
            for (int r = 0; r < 3; ++r)
                for (int k = 0; k < 3; ++k)
                    if (!(ss >> h(r, k))) throw DataError(parse_error(path, lineno, "expected 9 homography entries"));
            if (!(ss >> res >> rep)) throw DataError(parse_error(path, lineno, "expected residual diagnostics"));
            try {
                reg.homographies.emplace_back(h);
            } catch (const Error& e) {
                throw DataError(parse_error(path, lineno, e.what()));
            }
            reg.frame_indices.push_back(index);
            reg.residuals.push_back(res);
            reg.reprojection_rms.push_back(rep);
            reg.status.push_back(RefineStatus::NotRun);
        } else {
            throw DataError(parse_error(path, lineno, "unknown record `" + key + "`"));
        }
    }
    if (!have_camera) throw DataError(path.string() + ": missing camera record");
    if (reg.homographies.empty()) throw DataError(path.string() + ": no frame records");
    return reg;
}

std::vector<fs::path> glob_files(const std::string& pattern) {
    glob_t g{};
    std::vector<fs::path> out;
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0)
        for (std::size_t k = 0; k < g.gl_pathc; ++k) out.emplace_back(g.gl_pathv[k]);
    globfree(&g);
    std::sort(out.begin(), out.end());
    return out;
}

int index_from_filename(const fs::path& path) {
    const std::string stem = path.stem().string();
    std::size_t end = stem.size();
    std::size_t begin = end;
    while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
    if (begin == end) return -1;
    return std::stoi(stem.substr(begin, end - begin));
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace modsr::io
