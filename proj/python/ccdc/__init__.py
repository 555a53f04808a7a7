"""Cross-camera colorization: align a low-resolution color reference to a
high-resolution grayscale target and fuse them into a colorized image."""

from ccdc._core import (
    ConfigError,
    IoError,
    Pipeline,
    ShapeError,
    bicubic_resize,
    colorization_loss,
    default_config_text,
    gaussian_pyramid_shapes,
    gradcheck,
    load_flow,
    luminance,
    nrmse,
    psnr,
    read_png,
    render_visibility,
    rgb_to_yuv,
    save_flow,
    ssim,
    toy_dataset,
    train,
    visibility,
    warp,
    warping_loss,
    write_png,
    yuv_to_rgb,
)

__all__ = [
    "ConfigError",
    "IoError",
    "Pipeline",
    "ShapeError",
    "bicubic_resize",
    "colorization_loss",
    "default_config_text",
    "gaussian_pyramid_shapes",
    "gradcheck",
    "load_flow",
    "luminance",
    "nrmse",
    "psnr",
    "read_png",
    "render_visibility",
    "rgb_to_yuv",
    "save_flow",
    "ssim",
    "toy_dataset",
    "train",
    "visibility",
    "warp",
    "warping_loss",
    "write_png",
    "yuv_to_rgb",
]
