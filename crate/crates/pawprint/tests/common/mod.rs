//! Synthetic dog-face datasets written to disk in the CLI's file formats.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use pawprint::formats::landmarks::{write_landmark_file, LandmarkTable};
use pawprint::pnm;
use pawprint_core::{LandmarkSet, Point2, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const IMAGE_SIDE: usize = 112;

/// Landmarks of an upright face centered on the origin, ears standing.
pub const CANONICAL: [(f64, f64); 8] = [
    (-12.0, -5.0),
    (12.0, -5.0),
    (0.0, 8.0),
    (-22.0, -30.0),
    (-15.0, -20.0),
    (0.0, -22.0),
    (15.0, -20.0),
    (22.0, -30.0),
];

#[derive(Debug, Clone)]
pub struct Dog {
    pub identity: String,
    pub breed: &'static str,
    pub gender: &'static str,
}

/// Two breeds by two genders by two dogs.
pub fn eight_dogs() -> Vec<Dog> {
    let mut dogs = Vec::new();
    for breed in ["husky", "pug"] {
        for gender in ["male", "female"] {
            for n in 1..=2 {
                dogs.push(Dog {
                    identity: format!("{breed}-{gender}-{n}"),
                    breed,
                    gender,
                });
            }
        }
    }
    dogs
}

#[derive(Debug, Clone, Copy)]
pub struct Render {
    pub seed: u64,
    /// Largest head tilt in radians.
    pub max_tilt: f64,
    /// Amplitude of uniform per-pixel noise.
    pub pixel_noise: f64,
    /// Fraction of texture cells redrawn at random in each image.
    pub cell_dropout: f64,
}

impl Render {
    pub fn clean(seed: u64) -> Self {
        Render {
            seed,
            max_tilt: 0.35,
            pixel_noise: 6.0,
            cell_dropout: 0.0,
        }
    }

    pub fn noisy(seed: u64) -> Self {
        Render {
            seed,
            max_tilt: 0.35,
            pixel_noise: 90.0,
            cell_dropout: 0.45,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const CELL: f64 = 10.0;
const GRID: i64 = 8;

/// Identity texture in face coordinates: an 8x8 grid of 10-pixel cells.
fn cell_value(identity: u64, cx: i64, cy: i64) -> f64 {
    let h = mix(identity.wrapping_mul(1_000_003) ^ mix((cx * GRID + cy) as u64));
    30.0 + (h % 196) as f64
}

/// Renders one tilted, shifted face and returns it with its landmarks.
pub fn render_face(
    identity: u64,
    render: &Render,
    rng: &mut ChaCha8Rng,
) -> (RasterImage, LandmarkSet) {
    let tilt = rng.random_range(-render.max_tilt..=render.max_tilt);
    let center = Point2::new(
        IMAGE_SIDE as f64 / 2.0 + rng.random_range(-4.0..=4.0),
        IMAGE_SIDE as f64 / 2.0 + rng.random_range(-4.0..=4.0),
    );
    let dropped: Vec<bool> = (0..GRID * GRID)
        .map(|_| rng.random_bool(render.cell_dropout))
        .collect();
    let redraw: Vec<f64> = (0..GRID * GRID)
        .map(|_| rng.random_range(30.0..226.0))
        .collect();
    let (s, c) = tilt.sin_cos();
    let half = GRID as f64 * CELL / 2.0;
    let mut pixels = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let (dx, dy) = (x as f64 - center.x, y as f64 - center.y);
            // Inverse tilt maps image pixels to face coordinates.
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            let (cx, cy) = (
                ((u + half) / CELL).floor() as i64,
                ((v + half) / CELL).floor() as i64,
            );
            let base = if (0..GRID).contains(&cx) && (0..GRID).contains(&cy) {
                let cell = (cx * GRID + cy) as usize;
                if dropped[cell] {
                    redraw[cell]
                } else {
                    cell_value(identity, cx, cy)
                }
            } else {
                128.0 + 40.0 * (0.15 * (u + v)).sin()
            };
            let noise = if render.pixel_noise > 0.0 {
                rng.random_range(-render.pixel_noise..=render.pixel_noise)
            } else {
                0.0
            };
            pixels.push((base + noise).round().clamp(0.0, 255.0) as u8);
        }
    }
    let image = RasterImage::new(
        IMAGE_SIDE,
        IMAGE_SIDE,
        pawprint_core::Channels::Gray,
        pixels,
    )
    .unwrap();
    let points =
        CANONICAL.map(|(u, v)| Point2::new(center.x + c * u - s * v, center.y + s * u + c * v));
    (image, LandmarkSet::new(points).unwrap())
}

pub struct DatasetFiles {
    pub manifest: PathBuf,
    pub registry: PathBuf,
    pub landmarks: PathBuf,
    pub config: PathBuf,
}

/// Writes images, manifest, registry, landmarks and a run config under `dir`.
pub fn write_dataset(
    dir: &Path,
    dogs: &[Dog],
    per_dog: usize,
    render: &Render,
    config: &str,
) -> DatasetFiles {
    let images = dir.join("img");
    fs::create_dir_all(&images).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(render.seed);
    let mut manifest = String::from("image_id,path,identity,breed\n");
    let mut registry = String::from("identity,breed,gender\n");
    let mut landmarks = LandmarkTable::new();
    for (i, dog) in dogs.iter().enumerate() {
        registry.push_str(&format!("{},{},{}\n", dog.identity, dog.breed, dog.gender));
        for n in 0..per_dog {
            let id = format!("{}_{n:02}", dog.identity);
            let (image, lm) = render_face(i as u64 + 1, render, &mut rng);
            pnm::save(&images.join(format!("{id}.pgm")), &image).unwrap();
            manifest.push_str(&format!(
                "{id},img/{id}.pgm,{},{}\n",
                dog.identity, dog.breed
            ));
            landmarks.insert(id, lm);
        }
    }
    let files = DatasetFiles {
        manifest: dir.join("manifest.csv"),
        registry: dir.join("registry.csv"),
        landmarks: dir.join("landmarks.csv"),
        config: dir.join("run.conf"),
    };
    fs::write(&files.manifest, manifest).unwrap();
    fs::write(&files.registry, registry).unwrap();
    fs::write(&files.landmarks, write_landmark_file(&landmarks)).unwrap();
    fs::write(&files.config, config).unwrap();
    files
}
