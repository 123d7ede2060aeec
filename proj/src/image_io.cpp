#include "eauwseg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace eauwseg {

namespace fs = std::filesystem;

std::uint8_t quantize(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

namespace {

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "write_image", "cannot open " + path.string());
    return out;
}

struct Header {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
};

Header read_header(std::ifstream& in, const fs::path& path) {
    Header h;
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw Error(ErrorCode::Io, "read_image", "truncated header in " + path.string());
    };
    h.magic = next_token();
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
    in.get(); // single whitespace before the raster
    if (h.maxval != 255 || h.width <= 0 || h.height <= 0) {
        throw Error(ErrorCode::Io, "read_image", "unsupported netpbm header in " + path.string());
    }
    return h;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "read_image", "cannot open " + path.string());
    return in;
}

} // namespace

void write_ppm(const fs::path& path, const Image& image) {
    if (image.channels != 3) throw Error(ErrorCode::ShapeMismatch, "write_ppm", "expected 3 channels");
    auto out = open_out(path);
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    std::vector<char> raster(static_cast<std::size_t>(image.width * image.height * 3));
    std::size_t k = 0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) raster[k++] = static_cast<char>(quantize(image.at(c, x, y)));
        }
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

Image read_ppm(const fs::path& path) {
    auto in = open_in(path);
    const Header h = read_header(in, path);
    if (h.magic != "P6") throw Error(ErrorCode::Io, "read_ppm", "not a P6 file: " + path.string());
    std::vector<char> raster(static_cast<std::size_t>(h.width * h.height * 3));
    if (!in.read(raster.data(), static_cast<std::streamsize>(raster.size()))) {
        throw Error(ErrorCode::Io, "read_ppm", "truncated raster in " + path.string());
    }
    Image img(3, h.height, h.width);
    std::size_t k = 0;
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) {
            for (int c = 0; c < 3; ++c) img.at(c, x, y) = static_cast<float>(static_cast<unsigned char>(raster[k++])) / 255.0f;
        }
    }
    return img;
}

void write_pgm(const fs::path& path, const Grid<std::uint8_t>& gray) {
    auto out = open_out(path);
    out << "P5\n" << gray.width() << ' ' << gray.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.storage().data()), static_cast<std::streamsize>(gray.size()));
}

Grid<std::uint8_t> read_pgm(const fs::path& path) {
    auto in = open_in(path);
    const Header h = read_header(in, path);
    if (h.magic != "P5") throw Error(ErrorCode::Io, "read_pgm", "not a P5 file: " + path.string());
    Grid<std::uint8_t> g(h.height, h.width);
    if (!in.read(reinterpret_cast<char*>(g.storage().data()), static_cast<std::streamsize>(g.size()))) {
        throw Error(ErrorCode::Io, "read_pgm", "truncated raster in " + path.string());
    }
    return g;
}

void write_mask(const fs::path& path, const BinaryMask& mask) {
    Grid<std::uint8_t> g(mask.height(), mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) g[i] = mask[i] ? 255 : 0;
    write_pgm(path, g);
}

BinaryMask read_mask(const fs::path& path) {
    auto g = read_pgm(path);
    for (auto& v : g.storage()) v = v ? 1 : 0;
    return g;
}

} // namespace eauwseg
