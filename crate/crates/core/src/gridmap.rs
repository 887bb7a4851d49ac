//! Grid baseline: both views are quantized into square cells and, for every
//! frontal cell, a discrete distribution over bird's-eye cells is counted from
//! training corners. Top-left and bottom-right corners keep separate tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{BBox, DetectionRecord, FrameDims, Point, Space, View};

/// `(row, col)` cell index.
pub type Cell = (u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub cell_px: u32,
    pub frontal: FrameDims,
    pub birdeye: FrameDims,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cell_px: 10,
            frontal: FrameDims::default(),
            birdeye: FrameDims::default(),
        }
    }
}

impl GridSpec {
    pub fn new(cell_px: u32, frontal: FrameDims, birdeye: FrameDims) -> Result<Self> {
        if cell_px == 0 {
            return Err(Error::Config("cell_px must be positive".into()));
        }
        Ok(Self {
            cell_px,
            frontal,
            birdeye,
        })
    }

    pub fn dims(&self, view: View) -> FrameDims {
        match view {
            View::Frontal => self.frontal,
            View::Birdeye => self.birdeye,
        }
    }

    /// `(rows, cols)`; a partial last row or column counts as a cell.
    pub fn shape(&self, view: View) -> (u32, u32) {
        let d = self.dims(view);
        (d.height.div_ceil(self.cell_px), d.width.div_ceil(self.cell_px))
    }

    /// Center pixel of a cell, clipped to the frame for partial cells.
    pub fn cell_center(&self, cell: Cell, view: View) -> Point {
        let d = self.dims(view);
        let c = self.cell_px as f64;
        let mid = |idx: u32, extent: f64| {
            let lo = idx as f64 * c;
            0.5 * (lo + (lo + c).min(extent))
        };
        Point::new(mid(cell.1, d.w()), mid(cell.0, d.h()))
    }
}

pub fn cell_of(p: Point, spec: &GridSpec, view: View) -> Result<Cell> {
    let d = spec.dims(view);
    if !(0.0..=d.w()).contains(&p.x) {
        return Err(Error::OutOfRange {
            axis: "x",
            value: p.x,
            extent: d.w(),
        });
    }
    if !(0.0..=d.h()).contains(&p.y) {
        return Err(Error::OutOfRange {
            axis: "y",
            value: p.y,
            extent: d.h(),
        });
    }
    let (rows, cols) = spec.shape(view);
    let c = spec.cell_px as f64;
    let row = ((p.y / c).floor() as u32).min(rows - 1);
    let col = ((p.x / c).floor() as u32).min(cols - 1);
    Ok((row, col))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CornerRole {
    TopLeft,
    BottomRight,
}

impl CornerRole {
    pub const BOTH: [CornerRole; 2] = [CornerRole::TopLeft, CornerRole::BottomRight];

    fn name(self) -> &'static str {
        match self {
            CornerRole::TopLeft => "tl",
            CornerRole::BottomRight => "br",
        }
    }

    fn corner(self, b: &BBox) -> Point {
        match self {
            CornerRole::TopLeft => b.top_left(),
            CornerRole::BottomRight => b.bottom_right(),
        }
    }
}

/// Destination counts for one frontal cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellDistribution {
    counts: BTreeMap<Cell, u64>,
    total: u64,
}

impl CellDistribution {
    pub fn add(&mut self, cell: Cell, n: u64) {
        *self.counts.entry(cell).or_default() += n;
        self.total += n;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<Cell, u64> {
        &self.counts
    }

    pub fn probability(&self, cell: Cell) -> f64 {
        match self.counts.get(&cell) {
            Some(&c) if self.total > 0 => c as f64 / self.total as f64,
            _ => 0.0,
        }
    }

    /// Most frequent cell; ties go to the lowest `(row, col)`.
    pub fn argmax(&self) -> Option<Cell> {
        let mut best: Option<(Cell, u64)> = None;
        for (&cell, &count) in &self.counts {
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((cell, count));
            }
        }
        best.map(|(cell, _)| cell)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Option<Cell> {
        if self.total == 0 {
            return None;
        }
        let mut target = rng.random_range(0..self.total);
        for (&cell, &count) in &self.counts {
            if target < count {
                return Some(cell);
            }
            target -= count;
        }
        unreachable!("target below total")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FitReport {
    pub used: usize,
    /// Records skipped because a corner fell outside its frame.
    pub skipped: usize,
}

pub enum PredictMode<'a, R: Rng> {
    Argmax,
    Sample(&'a mut R),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub spec: GridSpec,
    tables: [BTreeMap<Cell, CellDistribution>; 2],
    observations: u64,
}

impl GridModel {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            tables: Default::default(),
            observations: 0,
        }
    }

    pub fn table(&self, role: CornerRole) -> &BTreeMap<Cell, CellDistribution> {
        &self.tables[role as usize]
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn is_empty(&self) -> bool {
        self.observations == 0
    }

    /// Adds one record's corner pairs; fails without side effects if any
    /// corner lies outside its frame.
    pub fn observe(&mut self, r: &DetectionRecord) -> Result<()> {
        let mut pairs = [((0, 0), (0, 0)); 2];
        for role in CornerRole::BOTH {
            let from = cell_of(role.corner(&r.frontal_box), &self.spec, View::Frontal)?;
            let to = cell_of(role.corner(&r.birdeye_box), &self.spec, View::Birdeye)?;
            pairs[role as usize] = (from, to);
        }
        for role in CornerRole::BOTH {
            let (from, to) = pairs[role as usize];
            self.tables[role as usize].entry(from).or_default().add(to, 1);
        }
        self.observations += 1;
        Ok(())
    }

    /// Distribution for `cell`, or for the nearest observed frontal cell.
    pub fn distribution(&self, role: CornerRole, cell: Cell) -> Option<&CellDistribution> {
        let table = self.table(role);
        if let Some(d) = table.get(&cell) {
            return Some(d);
        }
        let dist2 = |c: &Cell| {
            let dr = c.0 as i64 - cell.0 as i64;
            let dc = c.1 as i64 - cell.1 as i64;
            dr * dr + dc * dc
        };
        // BTreeMap iterates in (row, col) order and min_by_key keeps the first
        // minimum, so ties resolve to the lowest index.
        table.iter().min_by_key(|(c, _)| dist2(c)).map(|(_, d)| d)
    }

    pub fn predict<R: Rng>(&self, frontal_box: &BBox, mode: &mut PredictMode<'_, R>) -> Result<BBox> {
        if self.is_empty() {
            return Err(Error::Model("grid model has no observations".into()));
        }
        let mut corners = [Point::new(0.0, 0.0); 2];
        for role in CornerRole::BOTH {
            let p = role.corner(frontal_box);
            let d = self.spec.frontal;
            let p = Point::new(p.x.clamp(0.0, d.w()), p.y.clamp(0.0, d.h()));
            let from = cell_of(p, &self.spec, View::Frontal)?;
            let dist = self
                .distribution(role, from)
                .ok_or_else(|| Error::Model("grid table is empty".into()))?;
            let to = match mode {
                PredictMode::Argmax => dist.argmax(),
                PredictMode::Sample(rng) => dist.sample(*rng),
            }
            .expect("observed cells have counts");
            corners[role as usize] = self.spec.cell_center(to, View::Birdeye);
        }
        BBox::from_corners(corners[0], corners[1], Space::Pixel, View::Birdeye)
    }

    /// Sparse CSV: a `# grid` header line with the spec, then
    /// `role,frontal_row,frontal_col,birdeye_row,birdeye_col,count` rows.
    pub fn to_csv(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "# grid cell_px={} frontal={} birdeye={}\nrole,frontal_row,frontal_col,birdeye_row,birdeye_col,count\n",
            s.cell_px, s.frontal, s.birdeye
        );
        for role in CornerRole::BOTH {
            for (from, dist) in self.table(role) {
                for (to, count) in dist.counts() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        role.name(),
                        from.0,
                        from.1,
                        to.0,
                        to.1,
                        count
                    );
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Empty("grid model file"))?;
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let mut spec = GridSpec::default();
        let rest = header
            .strip_prefix("# grid")
            .ok_or_else(|| bad(1, "expected '# grid' header".into()))?;
        for field in rest.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| bad(1, format!("bad header field {field:?}")))?;
            match k {
                "cell_px" => {
                    spec.cell_px = v.parse().map_err(|e| bad(1, format!("cell_px: {e}")))?
                }
                "frontal" => spec.frontal = v.parse()?,
                "birdeye" => spec.birdeye = v.parse()?,
                _ => return Err(bad(1, format!("unknown header field {k:?}"))),
            }
        }
        let spec = GridSpec::new(spec.cell_px, spec.frontal, spec.birdeye)?;
        let mut model = GridModel::empty(spec);
        for (idx, line) in lines {
            if idx == 1 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad(idx + 1, format!("expected 6 columns, got {}", cols.len())));
            }
            let role = match cols[0] {
                "tl" => CornerRole::TopLeft,
                "br" => CornerRole::BottomRight,
                other => return Err(bad(idx + 1, format!("unknown role {other:?}"))),
            };
            let num = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(idx + 1, e.to_string()));
            let from = (num(cols[1])? as u32, num(cols[2])? as u32);
            let to = (num(cols[3])? as u32, num(cols[4])? as u32);
            let count = num(cols[5])?;
            model.tables[role as usize].entry(from).or_default().add(to, count);
        }
        model.observations = model
            .table(CornerRole::TopLeft)
            .values()
            .map(CellDistribution::total)
            .sum();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

pub fn fit_grid(train: &[DetectionRecord], spec: GridSpec) -> Result<(GridModel, FitReport)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut model = GridModel::empty(spec);
    let mut report = FitReport::default();
    for r in train {
        match model.observe(r) {
            Ok(()) => report.used += 1,
            Err(Error::OutOfRange { .. }) => report.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((model, report))
}

pub fn grid_predict<R: Rng>(
    model: &GridModel,
    frontal_box: &BBox,
    mode: &mut PredictMode<'_, R>,
) -> Result<BBox> {
    model.predict(frontal_box, mode)
}
