#pragma once

// 8-bit images, binary PGM/PPM IO, and the patch-grid puzzle pipeline:
// split an image into g x g cells, take one patch per cell in row-major
// order, and put shuffled patches back in place.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "permlearn/error.hpp"
#include "permlearn/permutation.hpp"
#include "permlearn/sequence.hpp"

namespace permlearn {

struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, channels interleaved

    Image() = default;
    Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), pixels(w * h * c, fill) {
        if (c != 1 && c != 3) throw InvalidArgumentError("Image: channels must be 1 or 3");
    }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }

    void validate() const {
        if (channels != 1 && channels != 3) throw InvalidArgumentError("Image: channels must be 1 or 3");
        if (pixels.size() != width * height * channels) throw ShapeError("Image: pixel buffer length mismatch");
    }

    /// Copy of the w x h region whose top-left corner is (x0, y0).
    Image crop(std::size_t x0, std::size_t y0, std::size_t w, std::size_t h) const {
        if (x0 + w > width || y0 + h > height) throw ShapeError("Image::crop: region exceeds image bounds");
        Image out(w, h, channels);
        for (std::size_t y = 0; y < h; ++y) {
            const auto* src = pixels.data() + ((y0 + y) * width + x0) * channels;
            std::copy(src, src + w * channels, out.pixels.data() + y * w * channels);
        }
        return out;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// ---------------------------------------------------------------------------
// Binary PGM (P5) / PPM (P6), maxval 255.

inline std::vector<std::uint8_t> encode_pixmap(const Image& img) {
    img.validate();
    const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline Image decode_pixmap(const std::vector<std::uint8_t>& data) {
    std::size_t pos = 0;
    auto skip_space_and_comments = [&] {
        while (pos < data.size()) {
            if (std::isspace(data[pos])) {
                ++pos;
            } else if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n' && data[pos] != '\r') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos;
        std::uint64_t v = 0;
        while (pos < data.size() && std::isdigit(data[pos])) {
            v = v * 10 + (data[pos] - '0');
            if (v > (1u << 30)) throw FormatError(std::string("pixmap ") + what + " too large", start);
            ++pos;
        }
        if (pos == start) throw FormatError(std::string("pixmap: expected ") + what, start);
        return static_cast<std::size_t>(v);
    };

    if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
        throw FormatError("pixmap: bad magic (expected P5 or P6)", 0);
    const std::size_t channels = data[1] == '6' ? 3 : 1;
    pos = 2;
    const std::size_t width = read_uint("width");
    const std::size_t height = read_uint("height");
    const std::size_t maxval_at = pos;
    const std::size_t maxval = read_uint("maxval");
    if (maxval != 255)
        throw FormatError("pixmap: unsupported maxval " + std::to_string(maxval) + " (only 255)", maxval_at);
    // exactly one whitespace byte separates the header from the raster
    if (pos >= data.size() || !std::isspace(data[pos])) throw FormatError("pixmap: missing raster separator", pos);
    ++pos;
    const std::size_t need = width * height * channels;
    if (data.size() - pos < need)
        throw FormatError("pixmap: truncated raster, expected " + std::to_string(need) + " bytes", data.size());
    Image img(width, height, channels);
    std::copy(data.begin() + static_cast<std::ptrdiff_t>(pos), data.begin() + static_cast<std::ptrdiff_t>(pos + need),
              img.pixels.begin());
    return img;
}

inline Image load_pixmap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open image: " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pixmap(data);
}

inline void save_pixmap(const Image& img, const std::filesystem::path& path) {
    const auto bytes = encode_pixmap(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open image for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing image: " + path.string());
}

// ---------------------------------------------------------------------------
// Patch grid

struct PatchGridSpec {
    std::size_t grid = 3;
    std::size_t patch_px = 64;
    /// Random patch offset inside each cell; off by default.
    bool jitter = false;

    void validate() const {
        if (grid < 2) throw InvalidArgumentError("patch grid must be at least 2x2");
        if (patch_px == 0) throw InvalidArgumentError("patch size must be positive");
    }
    std::size_t sequence_length() const { return grid * grid; }
};

/// g*g patches in row-major cell order (index = row * g + col). Each patch
/// is cut from the top-left corner of its cell, or at a random offset inside
/// the cell when spec.jitter is set and `rng` is given.
inline std::vector<Image> grid_split(const Image& img, const PatchGridSpec& spec, Rng* rng = nullptr) {
    spec.validate();
    img.validate();
    const std::size_t covered = spec.grid * spec.patch_px;
    if (img.width < covered || img.height < covered)
        throw ShapeError("grid_split: image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " smaller than " + std::to_string(covered) + "x" + std::to_string(covered));
    const std::size_t cell_w = img.width / spec.grid;
    const std::size_t cell_h = img.height / spec.grid;
    std::vector<Image> patches;
    patches.reserve(spec.grid * spec.grid);
    for (std::size_t r = 0; r < spec.grid; ++r)
        for (std::size_t c = 0; c < spec.grid; ++c) {
            std::size_t dx = 0, dy = 0;
            if (spec.jitter && rng) {
                dx = std::uniform_int_distribution<std::size_t>(0, cell_w - spec.patch_px)(*rng);
                dy = std::uniform_int_distribution<std::size_t>(0, cell_h - spec.patch_px)(*rng);
            }
            patches.push_back(img.crop(c * cell_w + dx, r * cell_h + dy, spec.patch_px, spec.patch_px));
        }
    return patches;
}

/// Tiles recover(perm, patches) onto a row-major g x g grid.
inline Image reassemble(const std::vector<Image>& patches, const Permutation& perm) {
    if (patches.empty()) throw ShapeError("reassemble: no patches");
    if (patches.size() != perm.size()) throw ShapeError("reassemble: patch count does not match permutation");
    const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(patches.size()))));
    if (g * g != patches.size()) throw ShapeError("reassemble: patch count is not a perfect square");
    const std::size_t pw = patches[0].width, ph = patches[0].height, ch = patches[0].channels;
    for (const auto& p : patches) {
        p.validate();
        if (p.width != pw || p.height != ph || p.channels != ch) throw ShapeError("reassemble: patch sizes differ");
    }
    const auto ordered = recover(perm, patches);
    Image out(g * pw, g * ph, ch);
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        const std::size_t x0 = (k % g) * pw, y0 = (k / g) * ph;
        for (std::size_t y = 0; y < ph; ++y) {
            const auto* src = ordered[k].pixels.data() + y * pw * ch;
            std::copy(src, src + pw * ch, out.pixels.data() + ((y0 + y) * out.width + x0) * ch);
        }
    }
    return out;
}

/// Pixel intensities scaled to [0, 1], flattened row-major with channels
/// interleaved, optionally with the patch mean subtracted.
inline FeatureVector patch_features(const Image& patch, bool subtract_mean = true) {
    patch.validate();
    FeatureVector f(patch.pixels.size());
    double mean = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        f[k] = patch.pixels[k] / 255.0;
        mean += f[k];
    }
    if (subtract_mean && !f.empty()) {
        mean /= static_cast<double>(f.size());
        for (double& v : f) v -= mean;
    }
    return f;
}

/// Ordered patch sequence of one image, as features.
inline SequenceSample image_to_sample(const Image& img, const PatchGridSpec& spec, bool subtract_mean = true) {
    const auto patches = grid_split(img, spec);
    SequenceSample s;
    for (const auto& p : patches) s.items.push_back(patch_features(p, subtract_mean));
    s.perm = Permutation::identity(patches.size());
    return s;
}

/// Structured test image: a radial intensity gradient around a jittered
/// centre, a weaker linear gradient in a random direction, and a few random
/// filled discs and rectangles.
inline Image procedural_image(std::size_t size, std::size_t channels, Rng& rng) {
    Image img(size, size, channels);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double s = static_cast<double>(size);
    const double cx = s * (0.5 + 0.08 * (u(rng) - 0.5));
    const double cy = s * (0.5 + 0.08 * (u(rng) - 0.5));
    const double radial_gain = 0.55 + 0.3 * u(rng);
    const double base = 0.15 + 0.15 * u(rng);
    const double angle = 2.0 * 3.14159265358979323846 * u(rng);
    const double lin_gain = 0.15 * u(rng);
    std::vector<double> tint(channels);
    for (auto& t : tint) t = 0.8 + 0.2 * u(rng);

    struct Shape {
        bool disc;
        double x, y, r, value;
    };
    std::vector<Shape> shapes;
    const int n_shapes = 2 + static_cast<int>(u(rng) * 4);
    for (int k = 0; k < n_shapes; ++k)
        shapes.push_back({u(rng) < 0.5, u(rng) * s, u(rng) * s, s * (0.03 + 0.07 * u(rng)), u(rng)});

    const double half_diag = s / std::sqrt(2.0);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            const double dist = std::hypot(px - cx, py - cy) / half_diag;
            double v = base + radial_gain * dist +
                       lin_gain * ((px / s - 0.5) * std::cos(angle) + (py / s - 0.5) * std::sin(angle));
            for (const auto& sh : shapes) {
                const bool inside = sh.disc ? std::hypot(px - sh.x, py - sh.y) <= sh.r
                                            : std::abs(px - sh.x) <= sh.r && std::abs(py - sh.y) <= sh.r;
                if (inside) v = 0.5 * v + 0.5 * sh.value;
            }
            for (std::size_t c = 0; c < channels; ++c) {
                const double q = std::clamp(v * tint[c], 0.0, 1.0);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(q * 255.0));
            }
        }
    return img;
}

// ---------------------------------------------------------------------------
// Dataset manifest: one image path per line, relative to the manifest's
// directory. Blank lines and lines starting with '#' are ignored.

inline std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error("cannot open manifest: " + manifest.string());
    std::vector<std::filesystem::path> paths;
    std::string line;
    std::size_t line_no = 0;
    const auto base = manifest.parent_path();
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        std::size_t start = 0;
        while (start < line.size() && std::isspace(static_cast<unsigned char>(line[start]))) ++start;
        if (start == line.size() || line[start] == '#') continue;
        auto p = base / line.substr(start);
        if (!std::filesystem::exists(p))
            throw FormatError::at_line("manifest entry does not exist: " + p.string(), line_no);
        paths.push_back(std::move(p));
    }
    return paths;
}

inline void write_manifest(const std::filesystem::path& manifest, const std::vector<std::string>& relative_paths) {
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw Error("cannot write manifest: " + manifest.string());
    for (const auto& p : relative_paths) out << p << '\n';
}

}  // namespace permlearn
