use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rewards::Event;

/// Orders per layout that the observation encoding has room for.
pub const MAX_ORDERS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tile {
    Floor,
    Counter,
    OnionDispenser,
    TomatoDispenser,
    DishDispenser,
    Pot,
    Serving,
}

impl Tile {
    fn from_char(c: char) -> Option<Tile> {
        Some(match c {
            ' ' | '1' | '2' => Tile::Floor,
            'X' => Tile::Counter,
            'O' => Tile::OnionDispenser,
            'T' => Tile::TomatoDispenser,
            'D' => Tile::DishDispenser,
            'P' => Tile::Pot,
            'S' => Tile::Serving,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            Tile::Floor => ' ',
            Tile::Counter => 'X',
            Tile::OnionDispenser => 'O',
            Tile::TomatoDispenser => 'T',
            Tile::DishDispenser => 'D',
            Tile::Pot => 'P',
            Tile::Serving => 'S',
        }
    }

    pub fn is_dispenser(self) -> bool {
        matches!(
            self,
            Tile::OnionDispenser | Tile::TomatoDispenser | Tile::DishDispenser
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub x: u8,
    pub y: u8,
}

impl Pos {
    pub const fn new(x: u8, y: u8) -> Pos {
        Pos { x, y }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Ingredient multiset of a pot or a soup. Totals never exceed 3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SoupContents {
    pub onions: u8,
    pub tomatoes: u8,
}

impl SoupContents {
    pub const fn new(onions: u8, tomatoes: u8) -> Self {
        SoupContents { onions, tomatoes }
    }

    pub fn total(self) -> u8 {
        self.onions + self.tomatoes
    }

    pub fn is_empty(self) -> bool {
        self.total() == 0
    }

    /// Whether `self` can still grow into `target` by adding ingredients.
    pub fn is_subset_of(self, target: SoupContents) -> bool {
        self.onions <= target.onions && self.tomatoes <= target.tomatoes
    }
}

impl fmt::Display for SoupContents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.onions, self.tomatoes) {
            (o, 0) => write!(f, "O{o}"),
            (0, t) => write!(f, "T{t}"),
            (o, t) => write!(f, "O{o}T{t}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Recipe {
    pub ingredients: SoupContents,
    pub cook_ticks: u32,
    pub reward: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("line {line}, column {column}: unknown character {ch:?}")]
    UnknownChar {
        line: usize,
        column: usize,
        ch: char,
    },
    #[error("line {line}: grid row has width {found}, expected {expected}")]
    RaggedGrid {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("start marker '{marker}' missing from the grid")]
    MissingStart { marker: char },
    #[error("line {line}, column {column}: start marker '{marker}' appears twice")]
    DuplicateStart {
        marker: char,
        line: usize,
        column: usize,
    },
    #[error("layout has no pot")]
    NoPot,
    #[error("layout has no serving area")]
    NoServing,
    #[error("layout has no dispenser")]
    NoDispenser,
    #[error("floor cell at {pos} lies on the grid boundary")]
    OpenBoundary { pos: Pos },
    #[error("empty grid")]
    EmptyGrid,
    #[error("grid larger than 255 cells in one dimension")]
    GridTooLarge,
    #[error("line {line}: {reason}")]
    BadOrder { line: usize, reason: String },
    #[error("layout lists no orders")]
    NoOrders,
    #[error("layout lists {0} orders, at most {MAX_ORDERS} are supported")]
    TooManyOrders(usize),
    #[error("line {line}: duplicate order {ingredients}")]
    DuplicateOrder {
        line: usize,
        ingredients: SoupContents,
    },
    #[error("missing `episode_length=` line")]
    MissingEpisodeLength,
    #[error("line {line}: {reason}")]
    BadSetting { line: usize, reason: String },
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Static description of a kitchen: tiles, start cells, menu and horizon.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub name: String,
    pub width: usize,
    pub height: usize,
    tiles: Vec<Tile>,
    pub starts: [Pos; 2],
    pub orders: Vec<Recipe>,
    pub episode_length: u32,
    /// Enables the three tomato-specific shaping events.
    pub tomato_events: bool,
    pots: Vec<Pos>,
    counters: Vec<Pos>,
    /// Cell index -> slot in `pots` or `counters`.
    slot: Vec<u16>,
    source: String,
}

const NO_SLOT: u16 = u16::MAX;

impl Layout {
    pub fn tile(&self, p: Pos) -> Tile {
        self.tiles[self.index(p)]
    }

    pub fn tile_at(&self, x: i32, y: i32) -> Option<Tile> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.tiles[y as usize * self.width + x as usize])
        }
    }

    pub fn index(&self, p: Pos) -> usize {
        p.y as usize * self.width + p.x as usize
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new((index % self.width) as u8, (index / self.width) as u8)
    }

    pub fn cells(&self) -> impl Iterator<Item = (Pos, Tile)> + '_ {
        self.tiles
            .iter()
            .enumerate()
            .map(|(i, &t)| (self.pos_of(i), t))
    }

    pub fn positions_of(&self, tile: Tile) -> impl Iterator<Item = Pos> + '_ {
        self.cells()
            .filter(move |&(_, t)| t == tile)
            .map(|(p, _)| p)
    }

    pub fn floor_cells(&self) -> Vec<Pos> {
        self.positions_of(Tile::Floor).collect()
    }

    /// Pots in row-major order.
    pub fn pots(&self) -> &[Pos] {
        &self.pots
    }

    /// Counters in row-major order.
    pub fn counters(&self) -> &[Pos] {
        &self.counters
    }

    pub fn pot_slot(&self, p: Pos) -> Option<usize> {
        (self.tile(p) == Tile::Pot).then(|| self.slot[self.index(p)] as usize)
    }

    pub fn counter_slot(&self, p: Pos) -> Option<usize> {
        (self.tile(p) == Tile::Counter).then(|| self.slot[self.index(p)] as usize)
    }

    /// Counters not on the outer boundary of the grid.
    pub fn middle_counters(&self) -> Vec<Pos> {
        self.counters
            .iter()
            .copied()
            .filter(|p| {
                p.x > 0
                    && p.y > 0
                    && (p.x as usize) < self.width - 1
                    && (p.y as usize) < self.height - 1
            })
            .collect()
    }

    pub fn event_catalogue(&self) -> &'static [Event] {
        Event::catalogue(self.tomato_events)
    }

    pub fn num_events(&self) -> usize {
        self.event_catalogue().len()
    }

    /// Recipe whose ingredients equal `contents`, if any.
    pub fn recipe_for(&self, contents: SoupContents) -> Option<&Recipe> {
        self.orders.iter().find(|r| r.ingredients == contents)
    }

    /// Cook time used for a full pot: the matching recipe's, else the
    /// slowest recipe on the menu.
    pub fn cook_ticks_for(&self, contents: SoupContents) -> u32 {
        match self.recipe_for(contents) {
            Some(r) => r.cook_ticks,
            None => self.orders.iter().map(|r| r.cook_ticks).max().unwrap_or(1),
        }
    }

    pub fn delivery_reward(&self, contents: SoupContents) -> u32 {
        self.recipe_for(contents).map_or(0, |r| r.reward)
    }

    /// Best order reward still reachable from a partial pot.
    pub fn max_achievable_reward(&self, contents: SoupContents) -> u32 {
        self.orders
            .iter()
            .filter(|r| contents.is_subset_of(r.ingredients))
            .map(|r| r.reward)
            .max()
            .unwrap_or(0)
    }

    pub fn max_cook_ticks(&self) -> u32 {
        self.orders.iter().map(|r| r.cook_ticks).max().unwrap_or(1)
    }

    /// The text this layout was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn load(path: &Path) -> Result<Layout, LayoutError> {
        let text = std::fs::read_to_string(path).map_err(|e| LayoutError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "layout".into());
        parse_layout_named(&text, &name)
    }
}

/// Parses a layout file. See [`parse_layout_named`].
pub fn parse_layout(text: &str) -> Result<Layout, LayoutError> {
    parse_layout_named(text, "layout")
}

/// Parses the grid block, a blank line, one order per line
/// (`ingredients=O1T2 cook=<ticks> reward=<points>`) and
/// `episode_length=<ticks>`. Optional `name=` and `extra_events=tomato`
/// lines may appear in the settings block; `#` starts a comment there.
pub fn parse_layout_named(text: &str, default_name: &str) -> Result<Layout, LayoutError> {
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    let mut i = 0;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    let grid_start = i;
    while i < lines.len() && !lines[i].trim().is_empty() {
        i += 1;
    }
    let grid_lines = &lines[grid_start..i];
    if grid_lines.is_empty() {
        return Err(LayoutError::EmptyGrid);
    }

    let width = grid_lines[0].chars().count();
    let height = grid_lines.len();
    if width > 255 || height > 255 {
        return Err(LayoutError::GridTooLarge);
    }
    let mut tiles = Vec::with_capacity(width * height);
    let mut starts: [Option<Pos>; 2] = [None, None];
    for (row, line) in grid_lines.iter().enumerate() {
        let line_no = grid_start + row + 1;
        let found = line.chars().count();
        if found != width {
            return Err(LayoutError::RaggedGrid {
                line: line_no,
                expected: width,
                found,
            });
        }
        for (col, ch) in line.chars().enumerate() {
            let tile = Tile::from_char(ch).ok_or(LayoutError::UnknownChar {
                line: line_no,
                column: col + 1,
                ch,
            })?;
            if ch == '1' || ch == '2' {
                let k = (ch as u8 - b'1') as usize;
                if starts[k].is_some() {
                    return Err(LayoutError::DuplicateStart {
                        marker: ch,
                        line: line_no,
                        column: col + 1,
                    });
                }
                starts[k] = Some(Pos::new(col as u8, row as u8));
            }
            tiles.push(tile);
        }
    }

    let mut name = default_name.to_string();
    let mut orders = Vec::new();
    let mut episode_length = None;
    let mut tomato_events = false;
    for (offset, raw) in lines[i..].iter().enumerate() {
        let line_no = i + offset + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("ingredients=") {
            let recipe = parse_order(line, line_no)?;
            if orders
                .iter()
                .any(|r: &Recipe| r.ingredients == recipe.ingredients)
            {
                return Err(LayoutError::DuplicateOrder {
                    line: line_no,
                    ingredients: recipe.ingredients,
                });
            }
            orders.push(recipe);
        } else if let Some(v) = line.strip_prefix("episode_length=") {
            let n: u32 = v.trim().parse().map_err(|_| LayoutError::BadSetting {
                line: line_no,
                reason: format!("bad episode length `{v}`"),
            })?;
            if n == 0 {
                return Err(LayoutError::BadSetting {
                    line: line_no,
                    reason: "episode length must be positive".into(),
                });
            }
            episode_length = Some(n);
        } else if let Some(v) = line.strip_prefix("name=") {
            name = v.trim().to_string();
        } else if let Some(v) = line.strip_prefix("extra_events=") {
            match v.trim() {
                "tomato" => tomato_events = true,
                "none" => tomato_events = false,
                other => {
                    return Err(LayoutError::BadSetting {
                        line: line_no,
                        reason: format!("unknown event set `{other}`"),
                    })
                }
            }
        } else {
            return Err(LayoutError::BadSetting {
                line: line_no,
                reason: format!("unrecognised line `{line}`"),
            });
        }
    }

    let layout = build(
        name,
        width,
        height,
        tiles,
        starts,
        orders,
        episode_length,
        tomato_events,
        text,
    )?;
    Ok(layout)
}

fn parse_order(line: &str, line_no: usize) -> Result<Recipe, LayoutError> {
    let bad = |reason: String| LayoutError::BadOrder {
        line: line_no,
        reason,
    };
    let mut ingredients = None;
    let mut cook = None;
    let mut reward = None;
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("field `{field}` is not key=value")))?;
        match key {
            "ingredients" => ingredients = Some(parse_ingredients(value).map_err(bad)?),
            "cook" => {
                cook = Some(
                    value
                        .parse::<u32>()
                        .map_err(|_| bad(format!("bad cook time `{value}`")))?,
                )
            }
            "reward" => {
                reward = Some(
                    value
                        .parse::<u32>()
                        .map_err(|_| bad(format!("bad reward `{value}`")))?,
                )
            }
            other => return Err(bad(format!("unknown field `{other}`"))),
        }
    }
    let ingredients = ingredients.ok_or_else(|| bad("missing ingredients".into()))?;
    let cook_ticks = cook.ok_or_else(|| bad("missing cook".into()))?;
    let reward = reward.ok_or_else(|| bad("missing reward".into()))?;
    if ingredients.total() != 3 {
        return Err(bad(format!(
            "orders need exactly 3 ingredients, `{ingredients}` has {}",
            ingredients.total()
        )));
    }
    if cook_ticks == 0 {
        return Err(bad("cook time must be positive".into()));
    }
    Ok(Recipe {
        ingredients,
        cook_ticks,
        reward,
    })
}

fn parse_ingredients(s: &str) -> Result<SoupContents, String> {
    let mut contents = SoupContents::default();
    let mut chars = s.chars().peekable();
    if chars.peek().is_none() {
        return Err("empty ingredient list".into());
    }
    while let Some(kind) = chars.next() {
        let mut digits = String::new();
        while let Some(d) = chars.peek().filter(|c| c.is_ascii_digit()) {
            digits.push(*d);
            chars.next();
        }
        let n: u8 = digits
            .parse()
            .map_err(|_| format!("missing count after `{kind}` in `{s}`"))?;
        match kind {
            'O' => contents.onions = contents.onions.saturating_add(n),
            'T' => contents.tomatoes = contents.tomatoes.saturating_add(n),
            other => return Err(format!("unknown ingredient `{other}` in `{s}`")),
        }
    }
    Ok(contents)
}

#[allow(clippy::too_many_arguments)]
fn build(
    name: String,
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    starts: [Option<Pos>; 2],
    orders: Vec<Recipe>,
    episode_length: Option<u32>,
    tomato_events: bool,
    source: &str,
) -> Result<Layout, LayoutError> {
    let start0 = starts[0].ok_or(LayoutError::MissingStart { marker: '1' })?;
    let start1 = starts[1].ok_or(LayoutError::MissingStart { marker: '2' })?;
    for (i, &t) in tiles.iter().enumerate() {
        let (x, y) = (i % width, i / width);
        let on_edge = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
        if on_edge && t == Tile::Floor {
            return Err(LayoutError::OpenBoundary {
                pos: Pos::new(x as u8, y as u8),
            });
        }
    }
    if !tiles.contains(&Tile::Pot) {
        return Err(LayoutError::NoPot);
    }
    if !tiles.contains(&Tile::Serving) {
        return Err(LayoutError::NoServing);
    }
    if !tiles.iter().any(|t| t.is_dispenser()) {
        return Err(LayoutError::NoDispenser);
    }
    if orders.is_empty() {
        return Err(LayoutError::NoOrders);
    }
    if orders.len() > MAX_ORDERS {
        return Err(LayoutError::TooManyOrders(orders.len()));
    }
    let episode_length = episode_length.ok_or(LayoutError::MissingEpisodeLength)?;

    let mut slot = vec![NO_SLOT; tiles.len()];
    let mut pots = Vec::new();
    let mut counters = Vec::new();
    for (i, &t) in tiles.iter().enumerate() {
        let p = Pos::new((i % width) as u8, (i / width) as u8);
        match t {
            Tile::Pot => {
                slot[i] = pots.len() as u16;
                pots.push(p);
            }
            Tile::Counter => {
                slot[i] = counters.len() as u16;
                counters.push(p);
            }
            _ => {}
        }
    }

    Ok(Layout {
        name,
        width,
        height,
        tiles,
        starts: [start0, start1],
        orders,
        episode_length,
        tomato_events,
        pots,
        counters,
        slot,
        source: source.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "XPXOX\nT1 2D\nX   X\nXXSXX\n\ningredients=O3 cook=20 reward=20\nepisode_length=50\n";

    #[test]
    fn minimal_layout_parses() {
        let l = parse_layout(MINIMAL).unwrap();
        assert_eq!((l.width, l.height), (5, 4));
        assert_eq!(l.starts, [Pos::new(1, 1), Pos::new(3, 1)]);
        assert_eq!(l.pots(), &[Pos::new(1, 0)]);
        assert_eq!(l.orders.len(), 1);
        assert_eq!(l.orders[0].ingredients, SoupContents::new(3, 0));
        assert_eq!(l.episode_length, 50);
        assert_eq!(l.num_events(), 20);
    }

    #[test]
    fn missing_start_is_named() {
        let text = MINIMAL.replace('1', " ");
        assert_eq!(
            parse_layout(&text).unwrap_err(),
            LayoutError::MissingStart { marker: '1' }
        );
    }

    #[test]
    fn ragged_grid_names_line() {
        let text =
            "XPXOX\nT1 2D\nX  X\nXXSXX\n\ningredients=O3 cook=20 reward=20\nepisode_length=50\n";
        assert_eq!(
            parse_layout(text).unwrap_err(),
            LayoutError::RaggedGrid {
                line: 3,
                expected: 5,
                found: 4
            }
        );
    }

    #[test]
    fn unknown_char_names_location() {
        let text = MINIMAL.replace("X   X", "X ? X");
        assert_eq!(
            parse_layout(&text).unwrap_err(),
            LayoutError::UnknownChar {
                line: 3,
                column: 3,
                ch: '?'
            }
        );
    }

    #[test]
    fn no_pot_rejected() {
        let text = MINIMAL.replace('P', "X");
        assert_eq!(parse_layout(&text).unwrap_err(), LayoutError::NoPot);
    }

    #[test]
    fn open_boundary_rejected() {
        let text = MINIMAL.replace("X   X", "    X");
        assert!(matches!(
            parse_layout(&text).unwrap_err(),
            LayoutError::OpenBoundary { .. }
        ));
    }

    #[test]
    fn order_must_have_three_items() {
        let text = MINIMAL.replace("O3", "O2");
        assert!(matches!(
            parse_layout(&text).unwrap_err(),
            LayoutError::BadOrder { line: 6, .. }
        ));
    }

    #[test]
    fn mixed_ingredients_parse() {
        assert_eq!(parse_ingredients("O1T2"), Ok(SoupContents::new(1, 2)));
        assert_eq!(parse_ingredients("T3"), Ok(SoupContents::new(0, 3)));
        assert!(parse_ingredients("X3").is_err());
        assert!(parse_ingredients("O").is_err());
    }

    #[test]
    fn reward_helpers() {
        let text = MINIMAL.replace(
            "ingredients=O3 cook=20 reward=20",
            "ingredients=O3 cook=20 reward=20\ningredients=T3 cook=10 reward=20",
        );
        let l = parse_layout(&text).unwrap();
        assert_eq!(l.max_achievable_reward(SoupContents::new(0, 0)), 20);
        assert_eq!(l.max_achievable_reward(SoupContents::new(1, 1)), 0);
        assert_eq!(l.cook_ticks_for(SoupContents::new(0, 3)), 10);
        assert_eq!(l.cook_ticks_for(SoupContents::new(2, 1)), 20);
        assert_eq!(l.delivery_reward(SoupContents::new(2, 1)), 0);
    }
}
