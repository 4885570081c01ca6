#include "camo/image_io.hpp"

#include <cstring>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace camo::io {

namespace {

cv::Mat to_bgr_mat(const ImageU8& img)
{
    cv::Mat rgb(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

ImageU8 from_bgr_mat(const cv::Mat& bgr)
{
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    ImageU8 out(rgb.rows, rgb.cols);
    for (int y = 0; y < rgb.rows; ++y) {
        std::memcpy(out.data() + static_cast<std::size_t>(y) * rgb.cols * 3, rgb.ptr<std::uint8_t>(y),
                    static_cast<std::size_t>(rgb.cols) * 3);
    }
    return out;
}

}  // namespace

ImageU8 read_image(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path)) {
        throw IoError("image not found: " + path.string());
    }
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty() || m.depth() != CV_8U) {
        throw IoError("cannot decode image as 8-bit RGB: " + path.string());
    }
    return from_bgr_mat(m);
}

void write_png(const std::filesystem::path& path, const ImageU8& img)
{
    const std::vector<int> flags{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imwrite(path.string(), to_bgr_mat(img), flags)) {
        throw IoError("cannot write PNG: " + path.string());
    }
}

void write_png(const std::filesystem::path& path, const BinaryMask& mask)
{
    cv::Mat m(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            m.at<std::uint8_t>(y, x) = mask.at(y, x) ? 255 : 0;
        }
    }
    const std::vector<int> flags{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imwrite(path.string(), m, flags)) {
        throw IoError("cannot write PNG: " + path.string());
    }
}

ImageU8 resize_bilinear(const ImageU8& img, int height, int width)
{
    if (img.height() == height && img.width() == width) {
        return img;
    }
    cv::Mat src(img.height(), img.width(), CV_8UC3, const_cast<std::uint8_t*>(img.data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    ImageU8 out(height, width);
    for (int y = 0; y < height; ++y) {
        std::memcpy(out.data() + static_cast<std::size_t>(y) * width * 3, dst.ptr<std::uint8_t>(y),
                    static_cast<std::size_t>(width) * 3);
    }
    return out;
}

ImageF jpeg_roundtrip(const ImageF& img, int quality)
{
    const ImageU8 u8 = to_u8(img);
    std::vector<std::uint8_t> buf;
    const std::vector<int> flags{cv::IMWRITE_JPEG_QUALITY, quality, cv::IMWRITE_JPEG_OPTIMIZE, 0,
                                 cv::IMWRITE_JPEG_PROGRESSIVE, 0};
    if (!cv::imencode(".jpg", to_bgr_mat(u8), buf, flags)) {
        throw IoError("JPEG encode failed");
    }
    cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) {
        throw IoError("JPEG decode failed");
    }
    return to_float(from_bgr_mat(decoded));
}

std::string jpeg_encoder_tag()
{
    return std::string("libjpeg baseline via OpenCV ") + CV_VERSION;
}

}  // namespace camo::io
