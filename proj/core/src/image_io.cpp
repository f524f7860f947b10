#include "ain/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <cctype>
#include <string>

#include "ain/errors.hpp"
#include "ain/serialize.hpp"

namespace ain {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    while (in) {
        int c = in.peek();
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    in >> tok;
    if (tok.empty()) throw FormatError(path.string() + ": truncated header");
    return tok;
}

std::size_t header_number(std::istream& in, const std::filesystem::path& path) {
    const std::string tok = header_token(in, path);
    try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": bad header field '" + tok + "'");
    }
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.height * image.width || image.pixels.empty())
        throw ConfigError("PGM pixel count does not match extents");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const Tensor<float> t = read_image(path);
    if (t.dim(2) != 1) throw FormatError(path.string() + ": not a grayscale image");
    GrayImage g{t.dim(0), t.dim(1), {}};
    g.pixels.reserve(t.size());
    for (float v : t.data()) g.pixels.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
    return g;
}

Tensor<float> read_image(const std::filesystem::path& path) {
    if (path.extension() == ".aint") {
        Tensor<float> t = load_tensor<float>(path);
        if (t.rank() == 2) t = t.reshaped({t.dim(0), t.dim(1), 1});
        if (t.rank() != 3) throw FormatError(path.string() + ": expected an (H, W, C) tensor");
        return t;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    const std::string magic = header_token(in, path);
    std::size_t channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw FormatError(path.string() + ": unsupported image type '" + magic + "' (need P5 or P6)");
    const std::size_t width = header_number(in, path);
    const std::size_t height = header_number(in, path);
    const std::size_t maxval = header_number(in, path);
    if (width == 0 || height == 0) throw FormatError(path.string() + ": zero image extent");
    if (maxval == 0 || maxval > 255) throw FormatError(path.string() + ": only 8-bit images are supported");
    in.get();  // single whitespace before the raster
    std::vector<unsigned char> raw(width * height * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw FormatError(path.string() + ": raster truncated at byte " + std::to_string(in.gcount()));
    Tensor<float> out({height, width, channels});
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
    return out;
}

GrayImage to_gray(const Tensor<float>& map) {
    if (map.rank() != 2) throw ConfigError("to_gray expects an (H, W) map, got " + to_string(map.shape()));
    GrayImage g{map.dim(0), map.dim(1), {}};
    g.pixels.reserve(map.size());
    for (float v : map.data())
        g.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    return g;
}

GrayImage upscale_nearest(const GrayImage& image, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw DomainError("upscale target has a zero extent");
    GrayImage out{height, width, std::vector<std::uint8_t>(height * width)};
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = y * image.height / height;
        for (std::size_t x = 0; x < width; ++x) out.pixels[y * width + x] = image.pixels[sy * image.width + x * image.width / width];
    }
    return out;
}

}  // namespace ain
