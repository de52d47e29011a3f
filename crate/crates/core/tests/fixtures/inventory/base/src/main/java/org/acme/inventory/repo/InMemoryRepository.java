package org.acme.inventory.repo;

import java.util.ArrayList;
import java.util.LinkedHashMap;
import java.util.List;
import java.util.Map;
import java.util.function.Function;

public class InMemoryRepository<T> implements Repository<T> {
    private final Map<String, T> rows = new LinkedHashMap<>();
    private final Function<T, String> key;

    public InMemoryRepository(Function<T, String> key) {
        this.key = key;
    }

    @Override
    public T find(String id) throws RepositoryException {
        T row = rows.get(id);
        if (row == null) {
            throw new RepositoryException("missing " + id);
        }
        return row;
    }

    @Override
    public void save(T value) throws RepositoryException {
        String id = key.apply(value);
        if (id == null || id.isEmpty()) {
            throw new RepositoryException("no key");
        }
        rows.put(id, value);
    }

    @Override
    public List<T> all() {
        return new ArrayList<>(rows.values());
    }
}
