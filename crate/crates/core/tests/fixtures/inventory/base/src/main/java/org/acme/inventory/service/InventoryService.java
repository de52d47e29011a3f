package org.acme.inventory.service;

import java.util.List;

import org.acme.inventory.model.Item;
import org.acme.inventory.repo.Repository;
import org.acme.inventory.repo.RepositoryException;

public class InventoryService {
    private static final int MAX_BATCH = 1000;

    private final Repository<Item> repository;
    private final AuditLog audit;

    public InventoryService(Repository<Item> repository, AuditLog audit) {
        this.repository = repository;
        this.audit = audit;
    }

    public void restock(String sku, int amount) throws RepositoryException {
        Item item = repository.find(sku);
        try {
            item.adjust(amount);
            repository.save(item);
        } catch (IllegalArgumentException e) {
            audit.record("restock rejected: " + sku);
        }
    }

    private int normalize(int amount) {
        if (amount > MAX_BATCH) {
            return MAX_BATCH;
        }
        return Math.max(amount, 0);
    }

    public int totalUnits() {
        int total = 0;
        for (Item item : repository.all()) {
            total += item.getQuantity();
        }
        return total;
    }

    public List<Item> lowStock(int threshold) {
        return repository.all().stream()
                .filter(i -> i.getQuantity() < threshold)
                .toList();
    }
}
