use nalgebra::DMatrix;

use crate::dataio::idx::IdxImageSet;
use crate::error::{Error, Result};
use crate::objectives::SoftmaxObjective;

/// Splits a labelled image set into one single-class client per label: client
/// `i` receives exactly the samples labelled `i`, in original dataset order.
/// Every client's objective still spans all `num_clients` classes.
pub fn partition_by_class(
    data: &IdxImageSet,
    num_clients: usize,
) -> Result<Vec<SoftmaxObjective>> {
    let distinct = data.num_distinct_labels();
    if distinct != num_clients {
        return Err(Error::Config(format!(
            "num_clients {num_clients} must equal the number of distinct labels {distinct}"
        )));
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= num_clients) {
        return Err(Error::Config(format!(
            "label {bad} outside 0..{num_clients}"
        )));
    }
    let dim = data.rows() * data.cols();
    let mut clients = Vec::with_capacity(num_clients);
    for class in 0..num_clients {
        let indices: Vec<usize> = data
            .labels()
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == class).then_some(i))
            .collect();
        if indices.is_empty() {
            return Err(Error::Config(format!("class {class} has no samples")));
        }
        let features = DMatrix::from_fn(indices.len(), dim, |r, c| data.pixels()[(indices[r], c)]);
        let labels = vec![class; indices.len()];
        clients.push(SoftmaxObjective::new(features, labels, num_clients)?);
    }
    Ok(clients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set() -> IdxImageSet {
        // 9 samples, labels interleaved 0,1,2,0,1,2,...
        let labels: Vec<usize> = (0..9).map(|i| i % 3).collect();
        let pixels = DMatrix::from_fn(9, 4, |i, j| (i * 4 + j) as f64 / 255.0);
        IdxImageSet::new(pixels, labels, 2, 2).unwrap()
    }

    #[test]
    fn each_client_holds_a_single_class_in_dataset_order() {
        let set = toy_set();
        let clients = partition_by_class(&set, 3).unwrap();
        assert_eq!(clients.len(), 3);
        for (class, c) in clients.iter().enumerate() {
            assert_eq!(c.num_samples(), 3);
            assert_eq!(c.num_classes(), 3);
            assert!(c.labels().iter().all(|&l| l == class));
            let expected: Vec<usize> = (0..9).filter(|i| i % 3 == class).collect();
            for (r, &orig) in expected.iter().enumerate() {
                for j in 0..4 {
                    assert_eq!(c.features()[(r, j)], set.pixels()[(orig, j)]);
                }
            }
        }
    }

    #[test]
    fn counts_match_the_label_histogram() {
        let set = toy_set();
        let clients = partition_by_class(&set, 3).unwrap();
        let mut hist = [0usize; 3];
        for &l in set.labels() {
            hist[l] += 1;
        }
        let total: usize = clients.iter().map(|c| c.num_samples()).sum();
        assert_eq!(total, set.len());
        for (class, c) in clients.iter().enumerate() {
            assert_eq!(c.num_samples(), hist[class]);
        }
    }

    #[test]
    fn wrong_client_count_is_a_configuration_error() {
        let set = toy_set();
        assert!(partition_by_class(&set, 4).is_err());
        assert!(partition_by_class(&set, 2).is_err());
    }
}
