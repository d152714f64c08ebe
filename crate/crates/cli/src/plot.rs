//! Plot emission: each figure is a plain-text gnuplot script next to a
//! whitespace-separated data file, so rendering needs nothing but gnuplot.

use std::fs;
use std::path::Path;

use privddc::Result;

/// Write a data file: a `#`-prefixed header row, then one row per record.
pub fn write_dat(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str("# ");
    out.push_str(&header.join(" "));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Script plotting selected columns of a data file as lines.
pub fn line_plot_script(
    path: &Path,
    dat_name: &str,
    title: &str,
    ylabel: &str,
    series: &[(usize, &str)],
    hline: Option<(f64, &str)>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("set title \"{title}\"\n"));
    out.push_str("set xlabel \"t\"\n");
    out.push_str(&format!("set ylabel \"{ylabel}\"\n"));
    out.push_str("set key outside\n");
    out.push_str("set grid\n");
    let mut parts: Vec<String> = series
        .iter()
        .map(|(col, name)| format!("\"{dat_name}\" using 1:{col} with lines title \"{name}\""))
        .collect();
    if let Some((level, name)) = hline {
        parts.push(format!("{level} with lines dashtype 2 lw 2 title \"{name}\""));
    }
    out.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    out.push_str("pause -1\n");
    fs::write(path, out)?;
    Ok(())
}

/// Script rendering a matrix data file as a heatmap (columns = grid points,
/// rows = histogram bins).
pub fn heatmap_script(
    path: &Path,
    dat_name: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
) -> Result<()> {
    let out = format!(
        "set title \"{title}\"\n\
         set xlabel \"{xlabel}\"\n\
         set ylabel \"{ylabel}\"\n\
         set view map\n\
         plot \"{dat_name}\" matrix with image notitle\n\
         pause -1\n"
    );
    fs::write(path, out)?;
    Ok(())
}
