//! Reduced words and conjugacy classes of the free group on two generators.

use corrlab::word::{
    enumerate_conjugacy_classes, enumerate_words, is_primitive, sort_classes, GeneratorAlphabet, Shard,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let alphabet = GeneratorAlphabet::standard(2)?;
    let max_len = 6;
    let words = enumerate_words(&alphabet, max_len, Shard::whole());
    let mut classes: Vec<_> = Shard::all(4)
        .into_iter()
        .flat_map(|s| enumerate_conjugacy_classes(&alphabet, max_len, s))
        .collect();
    sort_classes(&mut classes);
    println!("length  words  classes  primitive");
    for len in 1..=max_len {
        let w = words.iter().filter(|w| w.len() == len).count();
        let of_len: Vec<_> = classes.iter().filter(|c| c.len() == len).collect();
        let p = of_len.iter().filter(|c| is_primitive(c)).count();
        println!("{len:>6} {w:>6} {:>8} {p:>10}", of_len.len());
    }
    let shown: Vec<String> = classes
        .iter()
        .filter(|c| c.len() == 3)
        .map(|c| alphabet.display(c.representative()))
        .collect();
    println!("length-3 classes: {}", shown.join(" "));
    Ok(())
}
