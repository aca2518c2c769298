//! Experiment drivers: the mesh-coupling convergence table and integer
//! image denoising, plus the file formats they read and write.

mod denoise;
mod image;
mod noise;
mod table;

pub use denoise::{denoise, denoise_sweep, phantom, write_denoise_outputs, write_tv_vs_c, DenoiseConfig, DenoiseRun};
pub use image::{read_label_pgm, read_p0_csv, read_pgm, write_label_pgm, write_p0_csv, write_pgm, Pgm, PgmFormat};
pub use noise::{add_gaussian_noise, scale_to_labels, GaussianStream};
pub use table::{tv_table, tv_table_with, write_tv_table_csv, write_tv_table_gnuplot, TvTableRow, TV_TAU_MAX};
