use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Bit patterns of the point coordinates and the jet depth.
type Key = (Vec<u64>, usize);

/// Memoizes per-point, per-depth evaluation results. Keys use the exact bit
/// patterns of the point coordinates.
#[derive(Debug)]
pub(crate) struct PointCache<T> {
    map: Mutex<HashMap<Key, Arc<T>>>,
}

impl<T> Default for PointCache<T> {
    fn default() -> Self {
        PointCache {
            map: Mutex::new(HashMap::new()),
        }
    }
}

impl<T> PointCache<T> {
    pub fn get_or_try<E>(
        &self,
        point: &[f64],
        depth: usize,
        f: impl FnOnce() -> Result<T, E>,
    ) -> Result<Arc<T>, E> {
        let key = (point.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), depth);
        if let Some(v) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(v.clone());
        }
        let v = Arc::new(f()?);
        self.map
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| v.clone());
        Ok(v)
    }
}
