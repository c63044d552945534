#include "rbrnet/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>
#include <png.h>

#include "rbrnet/errors.hpp"

namespace rbrnet {

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image from_bytes(const unsigned char* data, std::int64_t w, std::int64_t h, std::int64_t c) {
    Image img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.pixels.resize(static_cast<std::size_t>(w * h * c));
    constexpr float inv = 1.0f / 255.0f;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        img.pixels[i] = static_cast<float>(data[i]) * inv;
    }
    return img;
}

Image decode_png_bytes(const std::vector<unsigned char>& bytes, const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DataError("undecodable PNG: " + path + " (" + image.message + ")");
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("undecodable PNG: " + path + " (" + msg + ")");
    }
    return from_bytes(buffer.data(), image.width, image.height, gray ? 1 : 3);
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
    char msg[JMSG_LENGTH_MAX];
};

void jpeg_error_longjmp(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->msg);
    std::longjmp(err->jump, 1);
}

// Only POD pointers cross the setjmp boundary; the buffer is owned by the caller.
bool jpeg_decompress_to(const unsigned char* bytes, std::size_t len,
                        std::vector<unsigned char>* buffer, std::int64_t* w, std::int64_t* h,
                        std::int64_t* c, std::string* message) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_longjmp;
    if (setjmp(err.jump)) {
        *message = err.msg;
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes, static_cast<unsigned long>(len));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    *w = cinfo.output_width;
    *h = cinfo.output_height;
    *c = cinfo.output_components;
    buffer->resize(static_cast<std::size_t>(*w * *h * *c));
    const std::size_t row_bytes = static_cast<std::size_t>(*w * *c);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = buffer->data() + cinfo.output_scanline * row_bytes;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

Image decode_jpeg_bytes(const std::vector<unsigned char>& bytes, const std::string& path) {
    std::vector<unsigned char> buffer;
    std::int64_t w = 0, h = 0, c = 0;
    std::string message;
    if (!jpeg_decompress_to(bytes.data(), bytes.size(), &buffer, &w, &h, &c, &message)) {
        throw DataError("undecodable JPEG: " + path + " (" + message + ")");
    }
    return from_bytes(buffer.data(), w, h, c);
}

unsigned char to_byte(float v) {
    const float clamped = std::min(1.0f, std::max(0.0f, v));
    return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

std::vector<unsigned char> to_byte_buffer(const Image& img) {
    std::vector<unsigned char> out(img.pixels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(img.pixels[i]);
    return out;
}

}  // namespace

Image decode_image(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' &&
        bytes[3] == 'G') {
        return decode_png_bytes(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
        return decode_jpeg_bytes(bytes, path);
    }
    throw DataError("unrecognized image format: " + path);
}

void encode_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw ValueError("encode_png: expected 1 or 3 channels");
    }
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width);
    image.height = static_cast<png_uint_32>(img.height);
    image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    const auto buffer = to_byte_buffer(img);
    if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw DataError("cannot write PNG: " + path + " (" + image.message + ")");
    }
}

void encode_jpeg(const std::string& path, const Image& img, int quality) {
    if (img.channels != 1 && img.channels != 3) {
        throw ValueError("encode_jpeg: expected 1 or 3 channels");
    }
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot write JPEG: " + path);
    jpeg_compress_struct cinfo;
    jpeg_error_mgr err;
    cinfo.err = jpeg_std_error(&err);
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, f);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = static_cast<int>(img.channels);
    cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const auto buffer = to_byte_buffer(img);
    const std::size_t row_bytes = static_cast<std::size_t>(img.width * img.channels);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<JSAMPROW>(buffer.data() + cinfo.next_scanline * row_bytes);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
}

Image to_luminance(const Image& img) {
    if (img.channels == 1) return img;
    Image out;
    out.width = img.width;
    out.height = img.height;
    out.channels = 1;
    out.pixels.resize(static_cast<std::size_t>(img.width * img.height));
    for (std::int64_t i = 0; i < img.width * img.height; ++i) {
        const float r = img.pixels[i * 3 + 0];
        const float g = img.pixels[i * 3 + 1];
        const float b = img.pixels[i * 3 + 2];
        out.pixels[i] = 0.299f * r + 0.587f * g + 0.114f * b;
    }
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image out;
    out.width = img.width;
    out.height = img.height;
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(img.width * img.height * 3));
    for (std::int64_t i = 0; i < img.width * img.height; ++i) {
        out.pixels[i * 3 + 0] = img.pixels[i];
        out.pixels[i * 3 + 1] = img.pixels[i];
        out.pixels[i * 3 + 2] = img.pixels[i];
    }
    return out;
}

Image resize_bilinear(const Image& img, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ValueError("resize: output dims must be >= 1");
    if (out_h == img.height && out_w == img.width) return img;
    Image out;
    out.width = out_w;
    out.height = out_h;
    out.channels = img.channels;
    out.pixels.resize(static_cast<std::size_t>(out_w * out_h * img.channels));
    const double sy = out_h == 1 ? 0.0 : static_cast<double>(img.height - 1) / (out_h - 1);
    const double sx = out_w == 1 ? 0.0 : static_cast<double>(img.width - 1) / (out_w - 1);
    const double cy = out_h == 1 ? (img.height - 1) / 2.0 : 0.0;
    const double cx = out_w == 1 ? (img.width - 1) / 2.0 : 0.0;
    for (std::int64_t y = 0; y < out_h; ++y) {
        const double fy = cy + sy * y;
        const std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
        const std::int64_t y1 = std::min(y0 + 1, img.height - 1);
        const float wy = static_cast<float>(fy - y0);
        for (std::int64_t x = 0; x < out_w; ++x) {
            const double fx = cx + sx * x;
            const std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            const std::int64_t x1 = std::min(x0 + 1, img.width - 1);
            const float wx = static_cast<float>(fx - x0);
            for (std::int64_t c = 0; c < img.channels; ++c) {
                const float top = img.at(y0, x0, c) * (1.0f - wx) + img.at(y0, x1, c) * wx;
                const float bot = img.at(y1, x0, c) * (1.0f - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

Tensor<float> image_to_tensor(const Image& img) {
    std::vector<float> planar(img.pixels.size());
    const std::int64_t plane = img.width * img.height;
    for (std::int64_t c = 0; c < img.channels; ++c) {
        for (std::int64_t i = 0; i < plane; ++i) {
            planar[c * plane + i] = img.pixels[i * img.channels + c];
        }
    }
    return Tensor<float>::from_values({img.channels, img.height, img.width}, std::move(planar));
}

Image tensor_to_image(const Tensor<float>& chw) {
    if (chw.ndim() != 3) throw ShapeError("tensor_to_image: expected [C x H x W]");
    Image img;
    img.channels = chw.dim(0);
    img.height = chw.dim(1);
    img.width = chw.dim(2);
    img.pixels.resize(static_cast<std::size_t>(chw.numel()));
    const std::int64_t plane = img.width * img.height;
    auto data = chw.data();
    for (std::int64_t c = 0; c < img.channels; ++c) {
        for (std::int64_t i = 0; i < plane; ++i) {
            img.pixels[i * img.channels + c] = std::min(1.0f, std::max(0.0f, data[c * plane + i]));
        }
    }
    return img;
}

}  // namespace rbrnet
