//! Synthetic catalog: product titles and search queries from a four-slot
//! template grammar (brand, feature, type, size) per category.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::task_dataset::{derive_seed, ProductRow};

#[derive(Debug, Clone)]
pub struct CategoryGrammar {
    pub name: &'static str,
    pub brands: &'static [&'static str],
    pub features: &'static [&'static str],
    pub types: &'static [&'static str],
    pub sizes: &'static [&'static str],
}

pub const HAIR: CategoryGrammar = CategoryGrammar {
    name: "hair_care",
    brands: &["OGX", "Pantene Pro-V", "Head & Shoulders", "Dove", "TRESemme", "Herbal Essences", "Garnier Fructis", "Aussie"],
    features: &["Brazilian Keratin", "Coconut Oil", "Argan Oil", "Anti-Frizz", "Tea Tree Mint", "Volume Boost", "Color Safe", "Sulfate-Free"],
    types: &["Shampoo", "Conditioner", "Hair Mask", "Leave-In Spray", "Dry Shampoo"],
    sizes: &["13 fl oz", "12 fl oz", "25.4 fl oz", "2 Pack", "8 oz"],
};

pub const SKIN: CategoryGrammar = CategoryGrammar {
    name: "skin_care",
    brands: &["Neutrogena", "CeraVe", "Olay", "La Roche-Posay", "Cetaphil", "Aveeno", "Eucerin", "Burt's Bees"],
    features: &["Hydro Boost", "Hyaluronic Acid", "Retinol", "Vitamin C", "Oil-Free", "Fragrance Free", "SPF 30", "Daily Moisturizing"],
    types: &["Gel Cream", "Face Wash", "Night Cream", "Body Lotion", "Eye Cream"],
    sizes: &["1.7 fl oz", "16 fl oz", "3 oz", "8 fl oz", "2 Pack"],
};

pub const SNACKS: CategoryGrammar = CategoryGrammar {
    name: "snacks",
    brands: &["Lay's", "Doritos", "Pringles", "Cheetos", "Kettle Brand", "Ritz", "Goldfish", "Cape Cod"],
    features: &["Classic", "Nacho Cheese", "Sour Cream & Onion", "Sea Salt", "Barbecue", "Jalapeno", "Reduced Fat", "Family Size"],
    types: &["Potato Chips", "Tortilla Chips", "Crackers", "Cheese Puffs", "Pretzels"],
    sizes: &["8 oz", "10 oz Bag", "12 Count", "1 oz Bags 20 Count", "13 oz"],
};

pub const COFFEE: CategoryGrammar = CategoryGrammar {
    name: "coffee",
    brands: &["Folgers", "Starbucks", "Maxwell House", "Dunkin'", "Peet's", "Lavazza", "Eight O'Clock", "Green Mountain"],
    features: &["Medium Roast", "Dark Roast", "French Vanilla", "Breakfast Blend", "Decaf", "Colombian", "House Blend", "Hazelnut"],
    types: &["Ground Coffee", "K-Cup Pods", "Whole Bean Coffee", "Instant Coffee", "Cold Brew"],
    sizes: &["12 oz", "24 Count", "30.5 oz Canister", "48 Count", "20 oz Bag"],
};

pub const LAUNDRY: CategoryGrammar = CategoryGrammar {
    name: "laundry",
    brands: &["Tide", "Gain", "Persil", "All", "Arm & Hammer", "Downy", "Purex", "Seventh Generation"],
    features: &["Original Scent", "Free & Clear", "Spring Meadow", "Ultra Concentrated", "High Efficiency", "Oxi Boost", "Lavender", "Sensitive Skin"],
    types: &["Liquid Detergent", "Laundry Pods", "Fabric Softener", "Dryer Sheets", "Stain Remover"],
    sizes: &["92 fl oz", "81 Count", "150 oz", "240 Sheets", "2 Pack"],
};

pub const PET: CategoryGrammar = CategoryGrammar {
    name: "pet_food",
    brands: &["Purina Pro Plan", "Blue Buffalo", "Pedigree", "Iams", "Hill's Science Diet", "Rachael Ray Nutrish", "Meow Mix", "Friskies"],
    features: &["Chicken & Rice", "Grain-Free", "Salmon Recipe", "Adult Formula", "Puppy", "Indoor", "Beef Flavor", "High Protein"],
    types: &["Dry Dog Food", "Wet Cat Food", "Dog Treats", "Dry Cat Food", "Dental Chews"],
    sizes: &["30 lb Bag", "24 Count Cans", "16 oz", "6.3 lb", "12 Pack"],
};

impl CategoryGrammar {
    /// Keeps the first `k` values of every slot.
    pub fn narrowed(&self, k: usize) -> CategoryGrammar {
        let cut = |xs: &'static [&'static str]| &xs[..k.clamp(1, xs.len())];
        CategoryGrammar {
            name: self.name,
            brands: cut(self.brands),
            features: cut(self.features),
            types: cut(self.types),
            sizes: cut(self.sizes),
        }
    }
}

/// Four training categories followed by two held-out ones.
pub fn default_grammars() -> Vec<CategoryGrammar> {
    vec![HAIR, SNACKS, COFFEE, LAUNDRY, SKIN, PET]
}

pub const HELD_OUT: [&str; 2] = ["skin_care", "pet_food"];

fn draw(g: &CategoryGrammar, rng: &mut ChaCha8Rng) -> [String; 4] {
    let pick = |xs: &'static [&'static str], rng: &mut ChaCha8Rng| (*xs.choose(rng).expect("non-empty slot")).to_owned();
    let brand = pick(g.brands, rng);
    let mut feature = pick(g.features, rng);
    if rng.random_bool(0.3) {
        let second = pick(g.features, rng);
        if second != feature {
            feature = format!("{feature} {second}");
        }
    }
    let ty = pick(g.types, rng);
    let size = pick(g.sizes, rng);
    [brand, feature, ty, size]
}

/// `per_category` titles per grammar, in grammar order.
pub fn synth_products(grammars: &[CategoryGrammar], per_category: usize, seed: u64) -> Vec<ProductRow> {
    let mut rows = Vec::with_capacity(grammars.len() * per_category);
    for (c, g) in grammars.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[10, c as u64]));
        for _ in 0..per_category {
            let [brand, feature, ty, size] = draw(g, &mut rng);
            let title = if rng.random_bool(0.2) {
                format!("{brand} {ty} with {feature}, {size}")
            } else {
                format!("{brand} {feature} {ty}, {size}")
            };
            rows.push(ProductRow {
                title: title.replace(',', ""),
                category: g.name.to_owned(),
            });
        }
    }
    rows
}

/// Search queries: in-order subsets of the four slots, over all grammars.
pub fn synth_queries(grammars: &[CategoryGrammar], lines: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[20]));
    const SHAPES: [&[usize]; 7] = [&[0, 2], &[1, 2], &[0, 1, 2], &[2, 3], &[0, 1, 2, 3], &[0], &[2]];
    const WEIGHTS: [f64; 7] = [0.25, 0.2, 0.2, 0.1, 0.1, 0.08, 0.07];
    (0..lines)
        .map(|_| {
            let g = &grammars[rng.random_range(0..grammars.len())];
            let slots = draw(g, &mut rng);
            let mut u: f64 = rng.random();
            let mut shape = SHAPES[SHAPES.len() - 1];
            for (s, w) in SHAPES.iter().zip(WEIGHTS) {
                if u < w {
                    shape = s;
                    break;
                }
                u -= w;
            }
            shape.iter().map(|&i| slots[i].as_str()).collect::<Vec<_>>().join(" ")
        })
        .collect()
}
