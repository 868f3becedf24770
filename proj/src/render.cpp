#include "octseg/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "octseg/io.hpp"

namespace octseg {

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_be32(out, crc);
}

}  // namespace

std::vector<std::uint8_t> encode_png_gray8(const ImageF& img) {
    const int w = img.cols(), h = img.rows();
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * (w + 1));
    for (int r = 0; r < h; ++r) {
        std::uint8_t* line = raw.data() + static_cast<std::size_t>(r) * (w + 1);
        line[0] = 0;  // filter: none
        for (int c = 0; c < w; ++c)
            line[c + 1] =
                static_cast<std::uint8_t>(std::lround(std::clamp(img(r, c), 0.0, 1.0) * 255.0));
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK)
        throw NumericalError("encode_png_gray8: deflate failed");
    compressed.resize(bound);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // deflate
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", compressed);
    put_chunk(png, "IEND", {});
    return png;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    static const char alphabet[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    if (i + 1 == bytes.size()) {
        std::uint32_t v = bytes[i] << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::string render_overlay(const BScan& scan,
                           const std::vector<std::pair<std::string, const SurfaceSet*>>& sets,
                           const std::filesystem::path& out_path) {
    static const char* kPalette[] = {"#ff2d95", "#ffd60a", "#00c2ff",
                                     "#3ddc84", "#ff7a00", "#b88cff"};
    const int w = scan.width(), h = scan.height();
    for (const auto& [name, set] : sets)
        if (set->width() != w)
            throw ValidationError("render_overlay: set '" + name + "' width mismatch");

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    svg << "<image width=\"" << w << "\" height=\"" << h
        << "\" image-rendering=\"pixelated\" href=\"data:image/png;base64,"
        << base64_encode(encode_png_gray8(scan.pixels)) << "\"/>\n";

    for (std::size_t si = 0; si < sets.size(); ++si) {
        const auto& [name, set] = sets[si];
        const char* color = kPalette[si % std::size(kPalette)];
        for (int s = 0; s < kNumSurfaces; ++s) {
            // one polyline per contiguous valid span
            int c = 0;
            while (c < w) {
                if (!set->is_valid(s, c)) {
                    ++c;
                    continue;
                }
                int start = c;
                while (c < w && set->is_valid(s, c)) ++c;
                svg << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1\" points=\"";
                for (int x = start; x < c; ++x) {
                    if (x > start) svg << ' ';
                    svg << format_string("%g,%.2f", x + 0.5, set->position(s, x) + 0.5);
                }
                svg << "\"/>\n";
            }
        }
    }

    for (std::size_t si = 0; si < sets.size(); ++si) {
        svg << "<text x=\"6\" y=\"" << 14 * (si + 1) << "\" fill=\""
            << kPalette[si % std::size(kPalette)] << "\" font-size=\"10\" "
            << "font-family=\"monospace\">" << sets[si].first << "</text>\n";
    }
    svg << "</svg>\n";

    std::string text = svg.str();
    write_text_file(out_path, text);
    return text;
}

}  // namespace octseg
