//! Whole-image reconstruction by tiles.
//!
//! The image is partitioned into `tile x tile` core regions (the last row and
//! column of cores may be smaller). Each core is inferred from a window
//! grown by `margin` pixels on every side (clipped at the image edge) so that
//! core pixels see real context instead of the network's zero padding; the
//! margin is cropped away when the cores are stitched. An image no larger
//! than one tile is a single forward pass.

use crate::imaging::{mosaic, BayerPattern, Image};

use super::network::Network;
use super::tensor::Tensor;
use super::NetError;

pub const TILE: usize = 32;
pub const TILE_MARGIN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    /// Output region written by this tile.
    pub core: Rect,
    /// Input window fed to the network.
    pub window: Rect,
}

pub fn plan_tiles(height: usize, width: usize, tile: usize, margin: usize) -> Vec<Tile> {
    assert!(tile > 0);
    let mut tiles = Vec::new();
    for row in (0..height).step_by(tile) {
        for col in (0..width).step_by(tile) {
            let core = Rect {
                row,
                col,
                height: tile.min(height - row),
                width: tile.min(width - col),
            };
            let r0 = row.saturating_sub(margin);
            let c0 = col.saturating_sub(margin);
            let r1 = (row + core.height + margin).min(height);
            let c1 = (col + core.width + margin).min(width);
            tiles.push(Tile {
                core,
                window: Rect {
                    row: r0,
                    col: c0,
                    height: r1 - r0,
                    width: c1 - c0,
                },
            });
        }
    }
    tiles
}

/// Demosaics a mosaic image (zero-filled, 3 channels) with `net` in eval
/// mode. Output is clamped to `[0, 1]`.
pub fn demosaic_network(net: &Network, mosaic_img: &Image) -> Result<Image, NetError> {
    let (h, w) = mosaic_img.dims();
    let tiles = plan_tiles(h, w, TILE, TILE_MARGIN);
    let outputs = net.exec().map_range(tiles.len(), |t| {
        let win = tiles[t].window;
        let crop = mosaic_img.crop(win.row, win.col, win.height, win.width);
        net.infer(&Tensor::from_images(&[&crop])?)?
            .to_images()
            .map(|mut v| v.remove(0))
    });
    let mut out = Image::new(h, w);
    for (tile, result) in tiles.iter().zip(outputs) {
        let patch = result?;
        let (c, win) = (tile.core, tile.window);
        for i in 0..c.height {
            for j in 0..c.width {
                let src = patch.pixel(c.row - win.row + i, c.col - win.col + j);
                for (ch, v) in src.iter().enumerate() {
                    out.set(c.row + i, c.col + j, ch, *v);
                }
            }
        }
    }
    out.clamp_unit();
    Ok(out)
}

/// Mosaics a full-colour image with `pattern`, then reconstructs it.
pub fn mosaic_and_reconstruct(net: &Network, img: &Image, pattern: BayerPattern) -> Result<Image, NetError> {
    demosaic_network(net, &mosaic(img, pattern))
}
